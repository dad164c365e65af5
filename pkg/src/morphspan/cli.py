"""Command-line interface.

Subcommands wire the library modules into an end-to-end pipeline with
CSV/JSON interchange and SVG figures. Exit codes: 0 success, 1
validation error, 2 I/O error. All outputs are deterministic for fixed
inputs, including under different --threads values.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import cohort as cohort_mod
from . import demo as demo_mod
from . import gamlss, phantoms, plots, qc, stats
from .errors import DegenerateInputError, FormatError, MorphspanError
from .morphometrics import (
    FEATURE_NAMES,
    bounding_box_face_ratios,
    connected_components,
    extract_features,
)
from .tables import (
    parse_float,
    read_csv,
    read_json,
    require_columns,
    write_csv,
    write_json,
)
from .volume_io import read_mask, resample_isotropic, write_mask

DEFAULT_LEVELS = (5, 50, 95)


class _Parser(argparse.ArgumentParser):
    # Usage errors exit 1, not argparse's default 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _threads(value):
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return n


def _pmap(fn, items, threads):
    """Map preserving input order; thread count never affects results."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- phantom


def _cmd_phantom(args):
    if args.kind in ("sphere", "edge-touching-sphere"):
        params = (args.r,)
    elif args.kind == "ellipsoid":
        params = (args.a, args.b, args.c)
    elif args.kind == "box":
        params = (args.lx, args.ly, args.lz)
    else:  # two-blobs
        params = (args.r1, args.r2, args.gap)
    if any(p is None for p in params):
        raise DegenerateInputError(
            f"kind {args.kind!r} needs parameters "
            "(sphere: --r; ellipsoid: --a --b --c; box: --lx --ly --lz; "
            "two-blobs: --r1 --r2 --gap)"
        )
    spec = phantoms.PhantomSpec(
        args.kind, params, spacing=args.spacing, padding=args.padding
    )
    write_mask(phantoms.generate(spec), args.out)
    if args.kind != "two-blobs":
        sidecar = os.path.splitext(
            args.out[:-3] if args.out.endswith(".gz") else args.out
        )[0] + ".json"
        write_json(sidecar, phantoms.analytic_features(spec))
    return 0


# ---------------------------------------------------------------- extract


def _extract_one(task):
    scan_id, path, resample_mm, connectivity = task
    mask = read_mask(path)
    if resample_mm is not None:
        mask = resample_isotropic(mask, resample_mm)
    n_comp, _ = connected_components(mask, connectivity)
    fv = extract_features(mask)
    row = {"scan_id": scan_id}
    row.update(fv.as_dict())
    row["voxel_volume_mm3"] = mask.voxel_volume_mm3()
    row["n_components"] = n_comp
    row["touches_edge"] = qc.edge_touch_flag(mask)
    return row


def _cmd_extract(args):
    rows = read_csv(args.manifest)
    require_columns(rows, ["scan_id", "path"], args.manifest)
    base = os.path.dirname(os.path.abspath(args.manifest))
    tasks = [
        (
            r["scan_id"],
            os.path.join(base, r["path"]),
            args.resample_mm,
            args.connectivity,
        )
        for r in rows
    ]
    out_rows = _pmap(_extract_one, tasks, args.threads)
    header = ["scan_id"] + list(FEATURE_NAMES) + [
        "voxel_volume_mm3", "n_components", "touches_edge",
    ]
    write_csv(args.out, header, out_rows)
    return 0


# ---------------------------------------------------------------- qc


def _qc_one(task):
    scan_id, path = task
    mask = read_mask(path)
    return scan_id, qc.edge_touch_flag(mask), bounding_box_face_ratios(mask)


def _cmd_qc_flags(args):
    rows = read_csv(args.manifest)
    require_columns(rows, ["scan_id", "path"], args.manifest)
    base = os.path.dirname(os.path.abspath(args.manifest))
    results = _pmap(
        _qc_one,
        [(r["scan_id"], os.path.join(base, r["path"])) for r in rows],
        args.threads,
    )
    ratios = [r[2] for r in results]
    if len(ratios) >= 10:
        outliers = qc.bbox_outlier_flags(ratios, z_threshold=args.z_threshold)
    else:
        import warnings

        warnings.warn("fewer than 10 scans; bounding-box outlier check skipped")
        outliers = [False] * len(ratios)
    out_rows = [
        {
            "scan_id": sid,
            "touches_edge": edge,
            "bbox_outlier": flagged,
            "excluded": edge or flagged,
        }
        for (sid, edge, _), flagged in zip(results, outliers)
    ]
    write_csv(
        args.out,
        ["scan_id", "touches_edge", "bbox_outlier", "excluded"],
        out_rows,
    )
    return 0


_VOLUME_COLS = [f"{o}_mm3" for o in qc.ORGANS]


def _cmd_qc_select(args):
    rows = read_csv(args.volumes)
    require_columns(
        rows, ["session_id", "scan_id", "age_years"] + _VOLUME_COLS, args.volumes
    )
    records = [
        qc.ScanQcRecord(
            session_id=r["session_id"],
            scan_id=r["scan_id"],
            age_years=float(r["age_years"]),
            volumes={o: float(r[f"{o}_mm3"]) for o in qc.ORGANS},
        )
        for r in rows
    ]
    polys = [
        qc.fit_lifespan_polynomial(
            [(rec.age_years, rec.volumes[organ]) for rec in records],
            degree=args.degree,
            organ=organ,
        )
        for organ in qc.ORGANS
    ]
    selected = qc.select_scan_per_session(records, polys)
    write_csv(
        args.out,
        ["session_id", "scan_id"],
        [(sid, selected[sid]) for sid in sorted(selected)],
    )
    return 0


def _cmd_fit_poly(args):
    rows = read_csv(args.infile)
    require_columns(rows, [args.x_col, args.y_col], args.infile)
    pts = [(float(r[args.x_col]), float(r[args.y_col])) for r in rows]
    ages = np.array([p[0] for p in pts])
    grid = np.linspace(ages.min(), ages.max(), args.grid_points)
    fit_vals, (lo, hi) = stats.trend_with_band(pts, degree=args.degree, grid=grid)
    write_csv(
        args.out,
        ["age", "fit", "lo", "hi"],
        [
            (float(a), float(f), float(l), float(h))
            for a, f, l, h in zip(grid, fit_vals, lo, hi)
        ],
    )
    return 0


# ---------------------------------------------------------------- cohort


def _cmd_label(args):
    demo_rows = read_csv(args.demographics)
    require_columns(
        demo_rows,
        ["patient_id", "age_years", "sex", "weight_kg", "modality", "scan_date"],
        args.demographics,
    )
    event_rows = read_csv(args.events)
    require_columns(
        event_rows, ["patient_id", "date", "vocabulary", "code"], args.events
    )
    codesets = cohort_mod.CodeSets.from_dict(read_json(args.codesets))

    by_patient = {}
    for r in event_rows:
        by_patient.setdefault(r["patient_id"], []).append(
            cohort_mod.EventRecord(
                patient_id=r["patient_id"],
                date=r["date"],
                vocabulary=r["vocabulary"],
                code=r["code"],
                description=r.get("description", "") or "",
            )
        )

    def label_one(r):
        a1c = parse_float(r.get("a1c"))
        group, reason = cohort_mod.assign_label(
            by_patient.get(r["patient_id"], ()),
            r["scan_date"],
            codesets,
            a1c=a1c,
            trauma_window_days=args.trauma_window_days,
        )
        return {
            "patient_id": r["patient_id"],
            "age_years": float(r["age_years"]),
            "sex": r["sex"],
            "weight_kg": float(r["weight_kg"]),
            "group": group,
            "modality": r["modality"],
            "scan_date": r["scan_date"],
            "exclusion_reason": reason,
            "a1c": a1c,
        }

    out_rows = _pmap(label_one, demo_rows, args.threads)
    write_csv(
        args.out,
        [
            "patient_id", "age_years", "sex", "weight_kg", "group",
            "modality", "scan_date", "exclusion_reason", "a1c",
        ],
        out_rows,
    )
    return 0


def _read_cohort_rows(path):
    rows = read_csv(path)
    require_columns(
        rows,
        ["patient_id", "age_years", "sex", "weight_kg", "group", "modality"],
        path,
    )
    out = []
    for r in rows:
        out.append(
            cohort_mod.CohortRow(
                patient_id=r["patient_id"],
                age_years=float(r["age_years"]),
                sex=r["sex"],
                weight_kg=float(r["weight_kg"]),
                group=r["group"],
                modality=r["modality"],
                scan_date=r.get("scan_date") or None,
                exclusion_reason=r.get("exclusion_reason") or None,
                a1c=parse_float(r.get("a1c")),
            )
        )
    return out


def _cohort_to_rows(cohort_rows):
    return [
        {
            "patient_id": r.patient_id,
            "age_years": r.age_years,
            "sex": r.sex,
            "weight_kg": r.weight_kg,
            "group": r.group,
            "modality": r.modality,
            "scan_date": r.scan_date.isoformat() if r.scan_date else None,
            "exclusion_reason": r.exclusion_reason,
            "a1c": r.a1c,
        }
        for r in cohort_rows
    ]


def _cmd_match(args):
    rows = _read_cohort_rows(args.cohort)
    if args.qc_flags:
        # Drop patients whose scans failed structural QC.
        flag_rows = read_csv(args.qc_flags)
        require_columns(flag_rows, ["scan_id", "excluded"], args.qc_flags)
        bad_scans = {r["scan_id"] for r in flag_rows if r["excluded"] == "true"}
        if not args.manifest:
            raise DegenerateInputError("--qc-flags requires --manifest")
        man = read_csv(args.manifest)
        require_columns(man, ["scan_id", "patient_id"], args.manifest)
        bad_patients = {
            r["patient_id"] for r in man if r["scan_id"] in bad_scans
        }
        rows = [r for r in rows if r.patient_id not in bad_patients]
    matched = cohort_mod.match_cohort(rows, bin_years=args.bin_years)
    write_csv(
        args.out,
        [
            "patient_id", "age_years", "sex", "weight_kg", "group",
            "modality", "scan_date", "exclusion_reason", "a1c",
        ],
        _cohort_to_rows(matched),
    )
    return 0


# ---------------------------------------------------------------- modeling


def _join_cohort_features(cohort_path, features_path, manifest_path, feature):
    """Join cohort rows to feature values through the scan manifest.

    Returns (age, diabetes, sex, weight, y) lists over non-excluded
    patients with a feature value.
    """
    cohort_rows = _read_cohort_rows(cohort_path)
    feat_rows = read_csv(features_path)
    require_columns(feat_rows, ["scan_id", feature], features_path)
    man = read_csv(manifest_path)
    require_columns(man, ["scan_id", "patient_id"], manifest_path)
    scan_to_patient = {r["scan_id"]: r["patient_id"] for r in man}
    value_by_patient = {}
    for r in feat_rows:
        pid = scan_to_patient.get(r["scan_id"])
        if pid is not None and pid not in value_by_patient:
            value_by_patient[pid] = float(r[feature])

    age, diabetes, sex, weight, y = [], [], [], [], []
    for r in cohort_rows:
        if r.group == "excluded" or r.patient_id not in value_by_patient:
            continue
        age.append(r.age_years)
        diabetes.append(1.0 if r.group == "t2d" else 0.0)
        sex.append(1.0 if r.sex == "M" else 0.0)
        weight.append(r.weight_kg)
        y.append(value_by_patient[r.patient_id])
    return age, diabetes, sex, weight, y


def _cmd_fit_gamlss(args):
    config = gamlss.FitConfig(
        n_basis=args.n_basis,
        target_edf=args.edf,
        max_outer=args.max_outer,
    )
    features = list(FEATURE_NAMES) if args.feature == "all" else [args.feature]
    if args.feature == "all" and not args.outdir:
        raise DegenerateInputError("--feature all requires --outdir")

    def fit_one(feature):
        data = _join_cohort_features(
            args.cohort, args.features, args.manifest, feature
        )
        return gamlss.fit(*data, config=config, feature=feature)

    fits = _pmap(fit_one, features, args.threads)
    for feature, result in zip(features, fits):
        if args.feature == "all":
            out = os.path.join(args.outdir, f"fit_{feature}.json")
        else:
            out = args.out
        write_json(out, gamlss.fit_to_dict(result))
    return 0


def _sex_mean_weights(cohort_path):
    rows = _read_cohort_rows(cohort_path)
    weights = {0: [], 1: []}
    for r in rows:
        if r.group != "excluded":
            weights[1 if r.sex == "M" else 0].append(r.weight_kg)
    out = {}
    for sex_code, vals in weights.items():
        if vals:
            out[sex_code] = float(np.mean(vals))
    if not out:
        raise DegenerateInputError(f"{cohort_path}: no usable cohort rows")
    return out


def _cmd_centiles(args):
    fit_result = gamlss.fit_from_dict(read_json(args.fit))
    levels = tuple(int(v) for v in args.levels.split(","))
    weights = _sex_mean_weights(args.cohort)
    lo, hi = fit_result.age_domain
    ages = np.linspace(lo, hi, args.grid_points)
    header = ["feature", "sex", "diabetes", "weight", "age"] + [
        f"p{lv}" for lv in levels
    ]
    out_rows = []
    for sex_code in sorted(weights):
        for diab in (0, 1):
            curve = gamlss.centiles(
                fit_result, sex_code, diab, weights[sex_code], ages, levels
            )
            for i, a in enumerate(curve.ages):
                out_rows.append(
                    [
                        fit_result.feature,
                        sex_code,
                        diab,
                        weights[sex_code],
                        float(a),
                    ]
                    + [float(v) for v in curve.values[i]]
                )
    write_csv(args.out, header, out_rows)
    return 0


def _cmd_fdr(args):
    if bool(args.infile) == bool(args.fits):
        raise DegenerateInputError("provide exactly one of --in or --fits")
    names, p, coefs, ses = [], [], [], []
    if args.infile:
        rows = read_csv(args.infile)
        require_columns(rows, ["feature", "p_raw"], args.infile)
        for r in rows:
            names.append(r["feature"])
            p.append(float(r["p_raw"]))
            coefs.append(parse_float(r.get("coefficient"), float("nan")))
            ses.append(parse_float(r.get("se"), float("nan")))
    else:
        for path in args.fits:
            d = read_json(path)
            coef = float(d["mu"]["beta_diabetes"])
            se = float(d["mu"]["se"]["beta_diabetes"])
            names.append(d.get("feature") or os.path.basename(path))
            p.append(gamlss.wald_p(coef, se))
            coefs.append(coef)
            ses.append(se)
    table = stats.bh_fdr(list(zip(names, p)), coefficients=coefs, ses=ses)
    write_csv(
        args.out,
        ["feature", "coefficient", "se", "p_raw", "p_adjusted", "significant"],
        [
            (r.name, r.coefficient, r.se, r.p_raw, r.p_adjusted, r.significant)
            for r in table
        ],
    )
    return 0


def _cmd_boxstats(args):
    cohort_rows = _read_cohort_rows(args.cohort)
    man = read_csv(args.manifest)
    require_columns(man, ["scan_id", "patient_id"], args.manifest)
    feat_rows = read_csv(args.features)
    require_columns(feat_rows, ["scan_id", args.feature], args.features)
    scan_to_patient = {r["scan_id"]: r["patient_id"] for r in man}
    value_by_patient = {}
    for r in feat_rows:
        pid = scan_to_patient.get(r["scan_id"])
        if pid is not None and pid not in value_by_patient:
            value_by_patient[pid] = float(r[args.feature])
    values = [
        (r.sex, r.age_years, value_by_patient[r.patient_id])
        for r in cohort_rows
        if r.group != "excluded" and r.patient_id in value_by_patient
    ]
    boxes = stats.box_stats(values)
    write_csv(
        args.out,
        [
            "sex", "age_bin", "n", "median", "q1", "q3",
            "whisker_low", "whisker_high", "outliers",
        ],
        [
            (
                b.sex, b.age_bin, b.n, b.median, b.q1, b.q3,
                b.whisker_low, b.whisker_high,
                ";".join(repr(v) for v in b.outliers),
            )
            for b in boxes
        ],
    )
    return 0


# ---------------------------------------------------------------- figures


def _cmd_plot(args):
    rows = read_csv(args.infile) if os.path.getsize(args.infile) else []
    if args.kind == "centiles":
        plots.render_centiles(rows, args.out)
    elif args.kind == "boxstats":
        if rows:
            require_columns(
                rows,
                ["sex", "age_bin", "median", "q1", "q3",
                 "whisker_low", "whisker_high"],
                args.infile,
            )
        plots.render_boxstats(rows, args.out)
    else:  # trend
        if rows:
            require_columns(rows, ["age", "fit", "lo", "hi"], args.infile)
        plots.render_trend(rows, args.out)
    return 0


def _cmd_mip(args):
    plots.render_mip(read_mask(args.infile), args.axis, args.out)
    return 0


def _cmd_demo(args):
    demo_mod.write_demo(
        args.outdir, n_patients=args.n_patients, seed=args.seed
    )
    return 0


# ---------------------------------------------------------------- pipeline


def _cmd_pipeline(args):
    """End-to-end run, composed from the individual subcommands."""
    out = args.outdir
    os.makedirs(out, exist_ok=True)
    base = os.path.dirname(os.path.abspath(args.manifest))
    demographics = args.demographics or os.path.join(base, "demographics.csv")
    events = args.events or os.path.join(base, "events.csv")
    codesets = args.codesets or os.path.join(base, "codesets.json")
    t = str(args.threads)

    def step(argv):
        code = run_subcommand(argv)
        if code != 0:  # pragma: no cover - subcommands raise on failure
            raise MorphspanError(f"pipeline step failed: {' '.join(argv)}")

    features = os.path.join(out, "features.csv")
    qc_flags = os.path.join(out, "qc_flags.csv")
    cohort_csv = os.path.join(out, "cohort.csv")
    matched = os.path.join(out, "cohort_matched.csv")

    step(["extract", "--manifest", args.manifest, "-o", features,
          "--threads", t])
    step(["qc-flags", "--manifest", args.manifest, "-o", qc_flags,
          "--threads", t])
    step(["label", "--demographics", demographics, "--events", events,
          "--codesets", codesets, "-o", cohort_csv, "--threads", t])
    step(["match", "--cohort", cohort_csv, "--qc-flags", qc_flags,
          "--manifest", args.manifest, "-o", matched])
    step(["fit-gamlss", "--cohort", matched, "--features", features,
          "--manifest", args.manifest, "--feature", "all",
          "--outdir", out, "--threads", t])
    fit_paths = [os.path.join(out, f"fit_{f}.json") for f in FEATURE_NAMES]
    step(["fdr", "--fits", *fit_paths, "-o", os.path.join(out, "pvalues.csv")])
    centiles_csv = os.path.join(out, "centiles.csv")
    step(["centiles", "--fit", os.path.join(out, "fit_volume_mm3.json"),
          "--cohort", matched, "-o", centiles_csv])
    step(["plot", "--kind", "centiles", "--in", centiles_csv,
          "-o", os.path.join(out, "centiles.svg")])
    step(["boxstats", "--cohort", matched, "--features", features,
          "--manifest", args.manifest, "--feature", "volume_mm3",
          "-o", os.path.join(out, "boxstats.csv")])
    step(["plot", "--kind", "boxstats", "--in",
          os.path.join(out, "boxstats.csv"),
          "-o", os.path.join(out, "boxstats.svg")])
    return 0


# ---------------------------------------------------------------- wiring


def build_parser():
    parser = _Parser(prog="morphspan", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("phantom", help="write a synthetic mask + feature sidecar")
    p.add_argument("--kind", required=True, choices=phantoms.KINDS)
    for flag in ("--r", "--a", "--b", "--c", "--lx", "--ly", "--lz",
                 "--r1", "--r2", "--gap"):
        p.add_argument(flag, type=float)
    p.add_argument("--spacing", type=float, default=3.0)
    p.add_argument("--padding", type=int, default=2)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("extract", help="features.csv from a scan manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--resample-mm", type=float, default=None)
    p.add_argument("--connectivity", type=int, default=26, choices=(6, 18, 26))
    p.add_argument("--threads", type=_threads, default=1)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("qc-flags", help="edge/bounding-box QC flags per scan")
    p.add_argument("--manifest", required=True)
    p.add_argument("--z-threshold", type=float, default=3.5)
    p.add_argument("--threads", type=_threads, default=1)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_qc_flags)

    p = sub.add_parser("qc-select", help="pick one scan per session")
    p.add_argument("--volumes", required=True,
                   help="organ_volumes.csv (session_id, scan_id, age_years, "
                        "<organ>_mm3 x5)")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_qc_select)

    p = sub.add_parser("fit-poly", help="polynomial trend with 95% CI band")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--x-col", default="age")
    p.add_argument("--y-col", default="value")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--grid-points", type=int, default=100)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_fit_poly)

    p = sub.add_parser("label", help="assign diabetes/control/excluded labels")
    p.add_argument("--demographics", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--codesets", required=True)
    p.add_argument("--trauma-window-days", type=int,
                   default=cohort_mod.TRAUMA_WINDOW_DAYS)
    p.add_argument("--threads", type=_threads, default=1)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("match", help="1:1 age/sex matched cohort")
    p.add_argument("--cohort", required=True)
    p.add_argument("--bin-years", type=int, default=5)
    p.add_argument("--qc-flags", default=None,
                   help="drop patients whose scan is flagged 'excluded'")
    p.add_argument("--manifest", default=None)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("boxstats", help="boxplot stats by sex and age decade")
    p.add_argument("--cohort", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--feature", default="volume_mm3")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_boxstats)

    p = sub.add_parser("fit-gamlss", help="BCCG distributional regression")
    p.add_argument("--cohort", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--feature", default="volume_mm3",
                   help="feature column, or 'all' (requires --outdir)")
    p.add_argument("--n-basis", type=int, default=20)
    p.add_argument("--edf", type=float, default=5.0)
    p.add_argument("--max-outer", type=int, default=200)
    p.add_argument("--threads", type=_threads, default=1)
    p.add_argument("-o", "--out", default=None)
    p.add_argument("--outdir", default=None)
    p.set_defaults(func=_cmd_fit_gamlss)

    p = sub.add_parser("centiles", help="centile curves from a fit.json")
    p.add_argument("--fit", required=True)
    p.add_argument("--cohort", required=True,
                   help="source of the per-sex mean weight")
    p.add_argument("--levels", default=",".join(str(v) for v in DEFAULT_LEVELS))
    p.add_argument("--grid-points", type=int, default=61)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_centiles)

    p = sub.add_parser("fdr", help="Benjamini-Hochberg adjusted p-values")
    p.add_argument("--in", dest="infile", default=None,
                   help="CSV with feature, p_raw columns")
    p.add_argument("--fits", nargs="+", default=None,
                   help="fit.json files; diabetes Wald p per file")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_fdr)

    p = sub.add_parser("plot", help="render a CSV as SVG")
    p.add_argument("--kind", required=True,
                   choices=("centiles", "boxstats", "trend"))
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("mip", help="maximum intensity projection SVG")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--axis", default="axial",
                   choices=("axial", "coronal", "sagittal"))
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_mip)

    p = sub.add_parser("demo", help="write the bundled synthetic dataset")
    p.add_argument("--n-patients", type=int, default=240)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("-o", "--outdir", required=True)
    p.set_defaults(func=_cmd_demo)

    p = sub.add_parser("pipeline", help="extract through figures, end to end")
    p.add_argument("--manifest", required=True)
    p.add_argument("--demographics", default=None)
    p.add_argument("--events", default=None)
    p.add_argument("--codesets", default=None)
    p.add_argument("--threads", type=_threads, default=1)
    p.add_argument("-o", "--outdir", required=True)
    p.set_defaults(func=_cmd_pipeline)

    return parser


def run_subcommand(argv) -> int:
    args = build_parser().parse_args(argv)
    if args.func is _cmd_fit_gamlss and args.feature != "all" and not args.out:
        raise DegenerateInputError("fit-gamlss needs -o/--out")
    return args.func(args)


def main(argv=None) -> int:
    try:
        return run_subcommand(sys.argv[1:] if argv is None else argv)
    except MorphspanError as exc:
        print(f"morphspan: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"morphspan: I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
