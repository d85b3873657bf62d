"""Command-line interface: ``nnauth sign|verify|bench|security``.

Exit codes: 0 success (verify: authentic), 1 verify found tampering,
2 any operational or usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile

import numpy as np

from . import bench, imagepipe, prng, report, sidecar

EXIT_OK, EXIT_TAMPERED, EXIT_ERROR = 0, 1, 2
KEY_ENV = "AUTH_KEY"


class CliError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _key(args) -> int:
    raw = args.key if args.key is not None else os.environ.get(KEY_ENV)
    if raw is None:
        raise CliError(f"no key given: pass --key or set {KEY_ENV}")
    return prng.parse_key(raw)


def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".nnauth-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_code(path: str) -> np.ndarray:
    img = imagepipe.as_channels(imagepipe.read_image(path))
    return (np.moveaxis(img, 2, 0) >= 128).astype(np.uint8)


def cmd_sign(args) -> int:
    key = _key(args)
    image = imagepipe.read_image(args.image)
    code = _load_code(args.code) if args.code else None
    desc = imagepipe.sign_image(image, key, args.block_size, args.margin, args.reps,
                                code=code, mode=args.mode)
    _atomic_write(args.out, sidecar.encode(desc))
    sec = bench.estimate_security(desc)
    grid = imagepipe.make_grid(desc.width, desc.height, desc.block_size)
    strip_w, strip_h = grid.uncovered
    print(f"descriptor: {args.out}")
    print(f"bits: {sec.n_bits}")
    print(f"blocks: {desc.effective_channels} x {grid.rows} x {grid.cols}")
    print(f"uncovered: right {strip_w}px, bottom {strip_h}px")
    print(f"log2_space: {sec.log2_space}" + ("  (weak: fewer than 64 bits)" if sec.weak else ""))
    return EXIT_OK


def cmd_verify(args) -> int:
    key = _key(args)
    if not 0.0 <= args.tau <= 1.0:
        raise CliError(f"--tau must lie in [0, 1], got {args.tau}")
    image = imagepipe.read_image(args.image)
    desc = sidecar.load(args.descriptor)
    rep = imagepipe.verify_image(image, desc, key, vote=args.vote)
    tampered = rep.mismatch_fraction > args.tau
    verdict = "tampered" if tampered else "authentic"
    text = report.format_report(rep, tau=args.tau, verdict=verdict)
    if args.out:
        _atomic_write(args.out, text.encode())
    if args.map_out:
        imagepipe.write_image(imagepipe.render_tamper_map(rep), args.map_out)
    print(f"cdr: {rep.cdr:.6f}")
    print(f"flagged_blocks: {rep.flagged_blocks}")
    print(f"verdict: {verdict}")
    return EXIT_TAMPERED if tampered else EXIT_OK


def cmd_bench(args) -> int:
    image = imagepipe.read_image(args.image)
    key = _key(args) if (args.key or os.environ.get(KEY_ENV)) else bench.SweepSpec.key
    spec = bench.SweepSpec(
        image=image, kind=args.kind,
        block_sizes=args.block_sizes or bench.DEFAULT_BLOCK_SIZES,
        margins=args.margins or bench.DEFAULT_MARGINS,
        levels=args.levels, trials=args.trials, base_seed=args.seed,
        reps=args.reps, key=key, mode=args.mode, workers=args.workers,
        map_dir=args.map_dir,
    )
    if args.map_dir:
        os.makedirs(args.map_dir, exist_ok=True)
    result = bench.run_sweep(spec)
    text = result.to_csv()
    if args.csv:
        _atomic_write(args.csv, text.encode("utf-8"))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_security(args) -> int:
    desc = sidecar.load(args.descriptor)
    sec = bench.estimate_security(desc)
    print(f"bits: {sec.n_bits}")
    print(f"log2_space: {sec.log2_space}")
    print(f"weak: {'yes' if sec.weak else 'no'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nnauth", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, margin=True):
        p.add_argument("-k", "--key", help=f"16 hex digit key (default: ${KEY_ENV})")
        p.add_argument("-B", "--block-size", type=int, default=8)
        if margin:
            p.add_argument("-T", "--margin", type=float, default=0.2)
        p.add_argument("-R", "--reps", type=int, default=1)
        p.add_argument("--mode", choices=imagepipe.CHANNEL_MODES, default="per-channel")

    p = sub.add_parser("sign", help="compute a descriptor for an image")
    p.add_argument("image")
    common(p)
    p.add_argument("--code", help="bitmap image supplying the code bits (>= 128 is 1)")
    p.add_argument("-o", "--out", required=True, help="descriptor output path")
    p.set_defaults(func=cmd_sign)

    p = sub.add_parser("verify", help="check an image against a descriptor")
    p.add_argument("image")
    p.add_argument("descriptor")
    p.add_argument("-k", "--key", help=f"16 hex digit key (default: ${KEY_ENV})")
    p.add_argument("--tau", type=float, default=0.0,
                   help="tolerated fraction of mismatching bits")
    p.add_argument("--vote", choices=("any", "majority"), default="any")
    p.add_argument("-o", "--out", help="write the text report here")
    p.add_argument("--map-out", help="write the tamper map (PGM or PNG)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="robustness sweep, CSV output")
    p.add_argument("image")
    p.add_argument("-k", "--key")
    p.add_argument("--kind", choices=("gaussian", "jpeg"), default="gaussian")
    p.add_argument("--block-sizes", type=_ints)
    p.add_argument("--margins", type=_floats)
    p.add_argument("--levels", type=_floats, help="variances or JPEG qualities")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-R", "--reps", type=int, default=1)
    p.add_argument("--mode", choices=imagepipe.CHANNEL_MODES, default="per-channel")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", help="output file (default: stdout)")
    p.add_argument("--map-dir", help="dump one tamper map per cell here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("security", help="brute-force estimate for a descriptor")
    p.add_argument("descriptor")
    p.set_defaults(func=cmd_security)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    if args.command == "bench" and args.kind == "jpeg" and args.levels:
        args.levels = tuple(int(q) for q in args.levels)
    try:
        return args.func(args)
    except (CliError, ValueError, OSError, RuntimeError) as exc:
        print(f"nnauth: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
