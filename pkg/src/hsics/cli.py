"""Command-line front end.

Every subcommand writes its outputs plus a JSON run manifest (parameters,
seeds, input and output hashes, tool version) and exits with 0 on success,
1 on invalid input and 2 on numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .binio import (
    read_dictionary,
    read_measurement,
    write_balance,
    write_dictionary,
    write_measurement,
)
from .dictlearn import TrainConfig, learn_dictionary
from .errors import HsicsError, NumericalError, ValidationError
from .experiments import (
    PIPELINES,
    check_hygiene,
    condition_curve,
    pipeline,
    relative_error,
    robustness_experiment,
    run_pipeline,
    write_condition_csv,
    write_trace_csv,
)
from .hsi import (
    SpectraSet,
    fmt,
    read_envi,
    read_spectra_csv,
    split_train_test,
    synth_scene,
    to_spectra,
    write_spectra_csv,
)
from .numerics import dct_basis
from .sensing import (
    balance,
    gaussian_measurement,
    sampling_ratio,
    sensing_matrix,
    subsample_measurement,
    svd_measurement,
)
from .solvers import solve_bpdn_batch

log = logging.getLogger("hsics")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; here those are validation errors (1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# helpers


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _int_list(text: str, flag: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"{flag}: expected comma-separated integers, got {text!r}") from None


def _band_list(text: str | None, d: int) -> list:
    """Parse ``--drop-bands`` such as ``0,5-9,100``."""
    if not text:
        return []
    out = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                a, b = (int(v) for v in part.split("-", 1))
                out.update(range(a, b + 1))
            else:
                out.add(int(part))
        except ValueError:
            raise ValidationError(f"--drop-bands: bad entry {part!r}") from None
    bad = [b for b in out if not 0 <= b < d]
    if bad:
        raise ValidationError(f"--drop-bands: band(s) {sorted(bad)} outside 0..{d - 1}")
    return sorted(out)


def load_spectra(path, dataset: str, drop_bands: str | None = None, normalize: bool = True) -> SpectraSet:
    """Read spectra from an ENVI header (.hdr) or a spectra CSV."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"input file not found: {path}")
    if path.suffix.lower() == ".hdr":
        s = to_spectra(read_envi(path), normalize=False, dataset_id=dataset)
    else:
        s = read_spectra_csv(path, dataset_id=dataset)
    drop = _band_list(drop_bands, s.d)
    if drop:
        keep = [b for b in range(s.d) if b not in set(drop)]
        s = s.select_bands(keep)
    if normalize and not s.normalized:
        from .hsi import _normalize

        s = _normalize(s)
    return s


def _pixel(text: str) -> tuple:
    try:
        x, y = (int(v) for v in text.split(":"))
    except ValueError:
        raise ValidationError(f"pixel must be given as x:y, got {text!r}") from None
    return x, y


def write_manifest(out_path: Path, command: str, params: dict, inputs: dict, outputs: list) -> Path:
    """JSON manifest beside an output file, or inside an output directory."""
    target = out_path / "manifest.json" if out_path.is_dir() else out_path.with_name(out_path.name + ".manifest.json")
    manifest = {
        "tool": "hsics",
        "version": __version__,
        "command": command,
        "parameters": params,
        "inputs": {k: {"path": str(v), "sha256": sha256_file(v)} for k, v in inputs.items() if v},
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
    }
    target.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target


def _outdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _sparsifier(args, d: int | None = None):
    """(matrix, Dictionary-or-None) from --dictionary or --dct."""
    if getattr(args, "dictionary", None):
        dic = read_dictionary(args.dictionary)
        return dic.matrix, dic
    if getattr(args, "dct", False):
        if d is None:
            raise ValidationError("--dct needs the band count (--d or a measurement file)")
        return dct_basis(d), None
    raise ValidationError("one of --dictionary or --dct is required")


def _write_matrix_csv(path, rows: np.ndarray, header: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(fmt(v) for v in r) + "\n")


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    scene = synth_scene(args.d, args.atoms, args.k, args.p, args.noise, args.seed, args.dictionary_seed)
    out = _outdir(args.out)
    spectra = out / "spectra.csv"
    dic = out / "dictionary.hsd"
    write_spectra_csv(scene.spectra, spectra)
    write_dictionary(scene.true_dictionary, dic)
    params = {
        "d": args.d, "atoms": args.atoms, "k": args.k, "p": args.p,
        "noise": args.noise, "seed": args.seed, "dictionary_seed": args.dictionary_seed,
    }
    write_manifest(out, "synth", params, {}, [spectra, dic])
    print(f"wrote {scene.spectra.p} spectra of {args.d} bands to {out}")
    return EXIT_OK


def cmd_learn(args) -> int:
    s = load_spectra(args.input, args.dataset, args.drop_bands)
    out = _outdir(args.out)
    outputs = []
    if args.train_fraction < 1.0:
        train, test = split_train_test(s, args.train_fraction, args.seed)
        for name, part in (("train.csv", train), ("test.csv", test)):
            write_spectra_csv(part, out / name)
            outputs.append(out / name)
    else:
        train = s
    cfg = TrainConfig(args.atoms, args.lam, args.epochs, args.seed, batch=args.batch)
    dic = learn_dictionary(train, cfg)
    write_dictionary(dic, out / "dictionary.hsd")
    outputs.append(out / "dictionary.hsd")
    hist = dic.provenance["objective_history"]
    _write_matrix_csv(out / "objective.csv", [[i, v] for i, v in enumerate(hist)], ["epoch", "objective"])
    outputs.append(out / "objective.csv")
    params = {
        "atoms": args.atoms, "lambda": dic.provenance["lambda"], "epochs": args.epochs,
        "seed": args.seed, "train_fraction": args.train_fraction, "batch": args.batch,
        "dataset": args.dataset, "drop_bands": args.drop_bands,
    }
    write_manifest(out, "learn", params, {"input": args.input}, outputs)
    print(f"learned {cfg.atom_count} atoms from {train.p} spectra; objective {hist[0]:.6g} -> {hist[-1]:.6g}")
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.method == "svd":
        D, _ = _sparsifier(args, args.d)
        phi = svd_measurement(D, args.m)
    else:
        d = args.d
        if d is None and args.dictionary:
            d = read_dictionary(args.dictionary).band_count
        if d is None:
            raise ValidationError("--d is required for gaussian/subsample sampling")
        make = gaussian_measurement if args.method == "gaussian" else subsample_measurement
        phi = make(args.m, d, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_measurement(phi, out)
    outputs = [out]
    inputs = {"dictionary": args.dictionary}
    if args.spectra:
        s = load_spectra(args.spectra, args.dataset)
        if s.d != phi.d:
            raise ValidationError(f"--spectra has {s.d} bands, measurement expects {phi.d}")
        y = SpectraSet(phi.phi @ s.columns, s.pixel_ids, False, None, s.dataset_id)
        ypath = out.with_name(out.stem + "_y.csv") if args.y_out is None else Path(args.y_out)
        write_spectra_csv(y, ypath)
        outputs.append(ypath)
        inputs["spectra"] = args.spectra
    params = {"method": args.method, "m": args.m, "d": phi.d, "seed": args.seed, "dct": args.dct}
    write_manifest(out, "sample", params, inputs, outputs)
    print(f"m={phi.m} of d={phi.d} bands: sampling ratio {sampling_ratio(phi.m, phi.d):.2f}%")
    return EXIT_OK


def _sensing_from_args(args):
    """Sensing matrix from --phi (+ sparsifier) or, for --m, the SVD sampler."""
    if args.phi:
        phi = read_measurement(args.phi)
        D, dic = _sparsifier(args, phi.d)
    else:
        if args.m is None:
            raise ValidationError("give --phi or --m")
        D, dic = _sparsifier(args, args.d)
        phi = svd_measurement(D, args.m)
    return phi, D, dic, sensing_matrix(phi, D)


def cmd_balance(args) -> int:
    _, _, _, sm = _sensing_from_args(args)
    dec = balance(sm.a, args.t_max)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_balance(dec, out)
    logp = out.with_name(out.stem + "_imbalance.csv")
    _write_matrix_csv(logp, [[t, v] for t, v in enumerate(dec.history)], ["iteration", "imbalance"])
    params = {"t_max": args.t_max, "m": sm.a.shape[0], "n": sm.a.shape[1]}
    write_manifest(out, "balance", params, {"phi": args.phi, "dictionary": args.dictionary}, [out, logp])
    print(f"{dec.iterations_run} iterations, imbalance {dec.history[0]:.3g} -> {dec.imbalance:.3g}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    phi, D, dic, sm = _sensing_from_args(args)
    y = load_spectra(args.measurements, args.dataset, normalize=False)
    if y.d != phi.m:
        raise ValidationError(f"--measurements has {y.d} rows, measurement matrix has {phi.m}")
    truth = None
    if args.truth:
        truth = load_spectra(args.truth, args.dataset)
        check_hygiene(dic, None, truth)
        if not np.array_equal(truth.pixel_ids, y.pixel_ids):
            raise ValidationError("--truth pixels do not match --measurements pixels")
    if args.balanced:
        dec = balance(sm.a)
        Yt = dec.solve_p(y.columns)
        rep = solve_bpdn_batch(dec.b, Yt, args.epsilon)
        S = rep.solutions / dec.q[:, None]
    else:
        rep = solve_bpdn_batch(sm.a, y.columns, args.epsilon)
        S = rep.solutions
    X = D @ S
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_spectra_csv(SpectraSet(X, y.pixel_ids, False, None, y.dataset_id), out)
    outputs = [out]
    params = {"epsilon": args.epsilon, "balanced": args.balanced, "dct": args.dct, "m": phi.m}
    summary = f"reconstructed {y.p} spectra ({int((~rep.converged).sum())} not converged)"
    if truth is not None:
        err = np.array([relative_error(X[:, i], truth.columns[:, i]) for i in range(y.p)])
        err[rep.infeasible] = np.nan
        finite = err[np.isfinite(err)]
        errp = out.with_name(out.stem + "_errors.csv")
        _write_matrix_csv(
            errp, [[x, yy, e] for (x, yy), e in zip(y.pixel_ids, err)], ["x", "y", "rel_err"]
        )
        outputs.append(errp)
        params["mean_rel_err"] = fmt(finite.mean()) if finite.size else "nan"
        summary += f"; mean relative error {params['mean_rel_err']}"
        if args.trace_pixel:
            px = _pixel(args.trace_pixel)
            hits = np.flatnonzero((truth.pixel_ids == px).all(axis=1))
            if not hits.size:
                raise ValidationError(f"--trace-pixel {args.trace_pixel} is not in the data")
            tp = out.with_name(out.stem + f"_trace_{px[0]}_{px[1]}.csv")
            write_trace_csv(tp, truth.columns[:, hits[0]], X[:, hits[0]], truth.wavelengths_nm)
            outputs.append(tp)
    inputs = {"measurements": args.measurements, "phi": args.phi, "dictionary": args.dictionary, "truth": args.truth}
    write_manifest(out, "reconstruct", params, inputs, outputs)
    print(summary)
    return EXIT_OK


def _compare_params(args) -> dict:
    return {
        "input": str(args.input),
        "methods": args.methods,
        "m": args.m,
        "epsilon": args.epsilon,
        "seed": args.seed,
        "atoms": args.atoms,
        "lambda": args.lam,
        "epochs": args.epochs,
        "train_fraction": args.train_fraction,
        "dataset": args.dataset,
        "drop_bands": args.drop_bands,
        "dictionary": str(args.dictionary) if args.dictionary else None,
        "trace_pixel": args.trace_pixel,
    }


def cmd_compare(args) -> int:
    if args.manifest:
        man = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        if man.get("command") != "compare":
            raise ValidationError(f"{args.manifest} is not a compare manifest")
        p = man["parameters"]
        for key, rec in man.get("inputs", {}).items():
            if not Path(rec["path"]).is_file() or sha256_file(rec["path"]) != rec["sha256"]:
                raise ValidationError(f"manifest input '{key}' ({rec['path']}) is missing or changed")
        args.input = p["input"]
        args.methods, args.m, args.epsilon, args.seed = p["methods"], p["m"], p["epsilon"], p["seed"]
        args.atoms, args.lam, args.epochs = p["atoms"], p["lambda"], p["epochs"]
        args.train_fraction, args.dataset, args.drop_bands = p["train_fraction"], p["dataset"], p["drop_bands"]
        args.dictionary, args.trace_pixel = p["dictionary"], p["trace_pixel"]
    if not args.input:
        raise ValidationError("--input (or --manifest) is required")
    methods = [m.strip().lower() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in PIPELINES:
            raise ValidationError(f"--methods: unknown method '{m}' (choose from {', '.join(PIPELINES)})")
    m_list = _int_list(args.m, "--m")
    specs = [pipeline(name, m_list, args.epsilon) for name in methods]
    s = load_spectra(args.input, args.dataset, args.drop_bands)
    train, test = split_train_test(s, args.train_fraction, args.seed)
    dic = None
    if any(sp.sparsifier == "learned" for sp in specs):
        if args.dictionary:
            dic = read_dictionary(args.dictionary)
        else:
            atoms = args.atoms if args.atoms else 2 * s.d
            dic = learn_dictionary(train, TrainConfig(atoms, args.lam, args.epochs, args.seed))
    out = _outdir(args.out)
    outputs = []
    if dic is not None and not args.dictionary:
        write_dictionary(dic, out / "dictionary.hsd")
        outputs.append(out / "dictionary.hsd")
    px = _pixel(args.trace_pixel) if args.trace_pixel else None
    col = None
    if px is not None:
        hits = np.flatnonzero((test.pixel_ids == px).all(axis=1))
        if not hits.size:
            raise ValidationError(f"--trace-pixel {args.trace_pixel} is not a test pixel")
        col = int(hits[0])
    for sp in specs:
        curve = run_pipeline(sp, train, test, args.seed, dic, keep_reconstructions=col is not None)
        path = out / f"{sp.name}.csv"
        curve.to_csv(path)
        outputs.append(path)
        if col is not None:
            for m, rec in zip(curve.m_values, curve.reconstructions):
                tp = out / f"trace_{sp.name}_m{m}.csv"
                write_trace_csv(tp, test.columns[:, col], rec[:, col], test.wavelengths_nm)
                outputs.append(tp)
        log.info("%s: %s", sp.name, ", ".join(f"m={m}: {e:.4g}" for m, e in zip(curve.m_values, curve.mean_rel_error)))
    inputs = {"input": args.input}
    if args.dictionary:
        inputs["dictionary"] = args.dictionary
    write_manifest(out, "compare", _compare_params(args), inputs, outputs)
    print(f"wrote {len(specs)} error curves over {test.p} test pixels to {out}")
    return EXIT_OK


def cmd_condcurve(args) -> int:
    D, _ = _sparsifier(args, args.d)
    m_list = _int_list(args.m, "--m")
    if any(not 1 <= m <= min(D.shape) for m in m_list):
        raise ValidationError(f"--m values must lie in 1..{min(D.shape)}")
    unb = condition_curve(D, m_list, balanced=False)
    bal = condition_curve(D, m_list, balanced=True, t_max=args.t_max)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_condition_csv(out, unb, bal)
    write_manifest(out, "condcurve", {"m": m_list, "t_max": args.t_max, "dct": args.dct}, {"dictionary": args.dictionary}, [out])
    print(f"condition curve for {len(m_list)} values of m written to {out}")
    return EXIT_OK


def cmd_robustness(args) -> int:
    a = load_spectra(args.scene_a, args.dataset_a, args.drop_bands)
    b = load_spectra(args.scene_b, args.dataset_b, args.drop_bands)
    a_train, _ = split_train_test(a, args.train_fraction, args.seed)
    b_train, b_test = split_train_test(b, args.train_fraction, args.seed)
    atoms = args.atoms if args.atoms else 2 * a.d
    cfg = TrainConfig(atoms, args.lam, args.epochs, args.seed)
    spec = pipeline("dsvd", _int_list(args.m, "--m"), args.epsilon)
    rep = robustness_experiment(a_train, b_train, b_test, cfg, spec, args.seed)
    out = _outdir(args.out)
    rep.cross_curve.to_csv(out / "cross.csv")
    rep.native_curve.to_csv(out / "native.csv")
    (out / "robustness.json").write_text(
        json.dumps({"rmse_between_curves": fmt(rep.rmse_between_curves)}, indent=2) + "\n", encoding="utf-8"
    )
    params = {
        "m": args.m, "epsilon": args.epsilon, "seed": args.seed, "atoms": atoms, "lambda": args.lam,
        "epochs": args.epochs, "train_fraction": args.train_fraction,
    }
    write_manifest(
        out, "robustness", params, {"scene_a": args.scene_a, "scene_b": args.scene_b},
        [out / "cross.csv", out / "native.csv", out / "robustness.json"],
    )
    print(f"rmse between cross and native curves: {rep.rmse_between_curves:.6g}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hsics", description="Compressive sensing of hyperspectral spectra.")
    ap.add_argument("--version", action="version", version=f"hsics {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def sparsifier_flags(p, required=False):
        g = p.add_mutually_exclusive_group(required=required)
        g.add_argument("--dictionary", help="dictionary file (HSDICT1)")
        g.add_argument("--dct", action="store_true", help="use the orthonormal DCT basis")

    p = sub.add_parser("synth", help="generate a planted-dictionary scene")
    p.add_argument("--d", type=int, required=True, help="band count")
    p.add_argument("--atoms", type=int, required=True)
    p.add_argument("--k", type=int, required=True, help="nonzeros per code")
    p.add_argument("--p", type=int, required=True, help="pixel count")
    p.add_argument("--noise", type=float, default=0.01, help="per-band noise sigma")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dictionary-seed", type=int, default=None, help="share a planted dictionary across scenes")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("learn", help="train a dictionary from a cube or spectra CSV")
    p.add_argument("--input", required=True, help="ENVI header (.hdr) or spectra CSV")
    p.add_argument("--atoms", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="default 1.2/sqrt(d)")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=None, help="minibatch size (default: full batch)")
    p.add_argument("--train-fraction", type=float, default=0.5, help="1 trains on everything")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dataset", default="input", help="label identifying the source dataset")
    p.add_argument("--drop-bands", default=None, help="bands to exclude, e.g. 0-4,100")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("sample", help="emit a measurement matrix")
    p.add_argument("--method", choices=["gaussian", "subsample", "svd"], required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--d", type=int, default=None, help="band count (gaussian/subsample/--dct)")
    sparsifier_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spectra", default=None, help="also measure these spectra")
    p.add_argument("--y-out", default=None, help="measurements CSV path (default <out>_y.csv)")
    p.add_argument("--dataset", default="input")
    p.add_argument("--out", required=True, help="measurement file (HSMEAS1)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("balance", help="balance a sensing matrix")
    p.add_argument("--phi", default=None, help="measurement file; otherwise SVD sampling with --m")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    sparsifier_flags(p, required=True)
    p.add_argument("--t-max", type=int, default=10)
    p.add_argument("--out", required=True, help="balanced decomposition file (HSBAL1)")
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("reconstruct", help="recover spectra from measurements")
    p.add_argument("--measurements", required=True, help="measurements CSV (from sample --spectra)")
    p.add_argument("--phi", default=None, help="measurement file")
    p.add_argument("--m", type=int, default=None, help="SVD sampling with m rows instead of --phi")
    p.add_argument("--d", type=int, default=None)
    sparsifier_flags(p, required=True)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--balanced", action="store_true")
    p.add_argument("--truth", default=None, help="reference spectra CSV for error reporting")
    p.add_argument("--trace-pixel", default=None, help="x:y pixel to export as a spectrum trace")
    p.add_argument("--dataset", default="input")
    p.add_argument("--out", required=True, help="reconstructed spectra CSV")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("compare", help="run several pipelines and write error curves")
    p.add_argument("--input", default=None, help="ENVI header or spectra CSV")
    p.add_argument("--manifest", default=None, help="rerun the compare recorded in this manifest")
    p.add_argument("--methods", default="dsvd,dgaussian,dsub,dctgaussian,dctsvd")
    p.add_argument("--m", default="4,8,16,32", help="comma-separated measurement counts")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--atoms", type=int, default=None, help="default 2*d")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--dictionary", default=None, help="use this dictionary instead of learning one")
    p.add_argument("--trace-pixel", default=None, help="x:y test pixel to export as spectrum traces")
    p.add_argument("--dataset", default="input")
    p.add_argument("--drop-bands", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("condcurve", help="condition numbers of SVD-sampled sensing matrices")
    sparsifier_flags(p, required=True)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--m", required=True, help="comma-separated measurement counts")
    p.add_argument("--t-max", type=int, default=10)
    p.add_argument("--out", required=True, help="condition curve CSV")
    p.set_defaults(func=cmd_condcurve)

    p = sub.add_parser("robustness", help="cross-scene dictionary transfer")
    p.add_argument("--scene-a", required=True)
    p.add_argument("--scene-b", required=True)
    p.add_argument("--dataset-a", default="scene-a")
    p.add_argument("--dataset-b", default="scene-b")
    p.add_argument("--m", default="4,8,16,32")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--atoms", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--drop-bands", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_robustness)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"hsics {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"hsics {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"hsics {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except HsicsError as exc:  # pragma: no cover - every subclass is handled above
        print(f"hsics {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
