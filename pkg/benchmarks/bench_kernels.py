"""Compare the numba and numpy kernels on a refined fracture mesh.

    python3 benchmarks/bench_kernels.py --be 40 --amr 5 --repeat 5
"""
import argparse
import time

import numpy as np

from fracfem.assembly import ElementQuadrature, scatter
from fracfem.fespace import FESpace
from fracfem.geometry import BoxDomain, Fracture, MaterialField, MatrixRegion
from fracfem.kernels import restrict_elements, zalesak_factors
from fracfem.mesh import build_mesh

SEGMENTS = [((0, .5), (1, .5)), ((.5, .75), (1, .75)), ((.5, .625), (.75, .625)),
            ((.5, 0), (.5, 1)), ((.75, .5), (.75, 1)), ((.625, .5), (.625, .75))]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--be", type=int, default=40)
    ap.add_argument("--amr", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    domain = BoxDomain(0.0, 0.0, 1.0, 1.0)
    fr = [Fracture.from_segment(a, b, 1e-4, 1e4, 1.0) for a, b in SEGMENTS]
    mat = MaterialField(domain, [MatrixRegion((0, 0, 1, 1), 1.0, 1.0)], fr)
    mesh = build_mesh(domain, args.be, args.be, fr, args.amr)
    space = FESpace(mesh)
    A = ElementQuadrature(mesh, mat).element_matrices("diffusion")
    print(f"mesh: {mesh.n_leaves} leaves, {space.n_dofs} dofs")

    rng = np.random.default_rng(0)
    Ar, _ = restrict_elements(space.elem_R, A, True)
    G = scatter(space, Ar)
    n = G.shape[0]
    F = rng.standard_normal(G.nnz)
    c = rng.uniform(size=n)
    args_z = (G.indptr, G.indices, F, c + 0.1, c - 0.1, c, np.ones(n), 1e-2, np.ones(n, bool))

    # compile outside the timed region
    restrict_elements(space.elem_R, A, True, backend="numba")
    zalesak_factors(*args_z, backend="numba")

    kernels = (
        ("restrict+stabilize", lambda b: restrict_elements(space.elem_R, A, True, backend=b)[0]),
        ("zalesak", lambda b: zalesak_factors(*args_z, backend=b)),
    )
    rows = []
    for name, fn in kernels:
        t_np = best_of(lambda: fn("numpy"), args.repeat)
        t_nb = best_of(lambda: fn("numba"), args.repeat)
        same = np.allclose(fn("numpy"), fn("numba"), rtol=0, atol=1e-13)
        rows.append((name, t_np, t_nb, same))
    print(f"{'kernel':<20}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}  agree")
    for name, a, b, same in rows:
        print(f"{name:<20}{a:12.4f}{b:12.4f}{a / b:10.1f}  {same}")


if __name__ == "__main__":
    main()
