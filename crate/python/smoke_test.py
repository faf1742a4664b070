"""Smoke test for the conflictsync extension module.

Build and install first, e.g. `maturin develop -m crates/py/pyproject.toml`,
then run `python python/smoke_test.py`.
"""

import conflictsync as cs


def main() -> None:
    a, b = cs.generate_pair(2000, 0.8, seed=7)
    print(f"replicas: {len(a)} / {len(b)} items, jaccard={cs.jaccard(a, b):.3f}")
    union = a.join(b)

    for algo in [cs.Algorithm("Baseline"), cs.Algorithm("Ra"), cs.Algorithm("BlBu", 0.01, 1.0)]:
        report, fa, fb = cs.run_session(algo, a, b, seed=1)
        assert report.converged and fa == union and fb == union, algo
        print(f"{str(algo):<22} total={report.total_bytes:>8} metadata={report.metadata_bytes:>7}")

    bloom = cs.BloomFilter(len(a), 0.01)
    for item in a.items():
        bloom.insert(item)
    assert all(item in bloom for item in a.items())
    assert cs.BloomFilter.from_bytes(bloom.to_bytes()).num_bits == bloom.num_bits

    local = [cs.digest(i) for i in a.items()]
    remote = [cs.digest(i) for i in b.items()]
    remote_only, local_only, used = cs.reconcile(local, remote)
    assert len(remote_only) == len(b.delta(a)) and len(local_only) == len(a.delta(b))
    print(f"reconciled {len(remote_only) + len(local_only)} digests with {used} coded symbols")
    print("OK")


if __name__ == "__main__":
    main()
