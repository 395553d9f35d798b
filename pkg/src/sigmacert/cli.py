"""Command-line entry point ``certify``.

::

    certify run SCENARIO.json [SCENARIO.json ...] --out DIR [--resolution N]
                [--check main|nonconvex|all] [--dump-fields] [--batch]
    certify gallery list
    certify gallery run NAME [--out DIR] [--resolution N] [--check ...]

The exit status is 0 (Diffeomorphism), 10 (BoundaryDegenerate),
11 (FoldDetected), 12 (Inconclusive) or 2 (input error). With several
scenarios each one writes to ``DIR/<name>`` and the largest status is
returned. ``--batch`` runs them in parallel processes; the environment
variable ``CERTIFY_THREADS`` caps the number of workers.
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import InputError
from .scenario import EXIT_INPUT_ERROR, gallery_scenario, list_gallery, load_scenario, run_scenario

logger = logging.getLogger("sigmacert")


def max_workers(n_jobs):
    cap = os.environ.get("CERTIFY_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise InputError(f"expected a positive integer, got {cap!r}", "CERTIFY_THREADS") from None
    return max(1, min(limit, n_jobs))


def _summary(label, result):
    if result.error:
        return f"{label}: input error: {result.error}"
    rep = result.report["certificates"][result.report["primary_certificate"]]
    return (
        f"{label}: {result.verdict} (exit {result.exit_code}); "
        f"min boundary det {rep['min_boundary_det']:.6g}; report in {result.out_dir}"
    )


def _run_one(job):
    source, out_dir, resolution, check, dump = job
    result = run_scenario(source, out_dir, resolution=resolution, check=check, dump_fields=dump)
    result.report = None if result.error else {
        "primary_certificate": result.report["primary_certificate"],
        "certificates": result.report["certificates"],
    }
    return result


def _jobs(args, sources):
    if len(sources) == 1:
        return [(sources[0], Path(args.out), args.resolution, args.check, args.dump_fields)]
    jobs, seen = [], set()
    for src in sources:
        try:
            name = src["name"] if isinstance(src, dict) else load_scenario(src)["name"]
        except InputError:
            name = Path(src).stem
        base, k = name, 1
        while name in seen:
            k += 1
            name = f"{base}-{k}"
        seen.add(name)
        jobs.append((src, Path(args.out) / name, args.resolution, args.check, args.dump_fields))
    return jobs


def _execute(args, sources, labels):
    jobs = _jobs(args, sources)
    if args.batch and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=max_workers(len(jobs))) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    for label, result in zip(labels, results):
        print(_summary(label, result), file=sys.stderr if result.error else sys.stdout)
    return max(r.exit_code for r in results)


def cmd_run(args):
    return _execute(args, [str(p) for p in args.scenarios], [str(p) for p in args.scenarios])


def cmd_gallery_list(args):
    for name, description in list_gallery():
        print(f"{name:<20s} {description}")
    return 0


def cmd_gallery_run(args):
    sc = gallery_scenario(args.name)
    return _execute(args, [sc], [args.name])


def build_parser():
    parser = argparse.ArgumentParser(
        prog="certify",
        description="Certify or refute global invertibility of sigma-harmonic mappings of the disk.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_options(p, out_required):
        p.add_argument("--out", required=out_required, default=None if out_required else "certify-out", help="output directory")
        p.add_argument("--resolution", type=int, help="number of boundary vertices (overrides the scenario)")
        p.add_argument("--check", choices=["main", "nonconvex", "all"], help="which certificate(s) to issue")
        p.add_argument("--dump-fields", action="store_true", help="also write fields.csv with u1, u2, v per vertex")
        p.add_argument("--batch", action="store_true", help="run several scenarios in parallel processes")

    run = sub.add_parser("run", help="run scenario files")
    run.add_argument("scenarios", nargs="+", type=Path, metavar="SCENARIO")
    add_run_options(run, out_required=True)
    run.set_defaults(func=cmd_run)

    gallery = sub.add_parser("gallery", help="built-in scenarios")
    gsub = gallery.add_subparsers(dest="gallery_command", required=True)
    gl = gsub.add_parser("list", help="list gallery scenarios")
    gl.set_defaults(func=cmd_gallery_list)
    gr = gsub.add_parser("run", help="run a gallery scenario")
    gr.add_argument("name")
    add_run_options(gr, out_required=False)
    gr.set_defaults(func=cmd_gallery_run)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which matches the input-error status
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
