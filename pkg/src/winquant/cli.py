"""Command-line entry point: ``winquant {eval,search,sqnr-map,sample}``.

Exit codes: 0 success, 1 usage or configuration error, 2 internal
invariant violation. Results are computed in full before any file is
written, so a failing command leaves no partial output.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .backbone import Model, build_model, forward_float, forward_mixed, random_input
from .compression import GRID_STEPS, CompressionConfig, Mode
from .config import RunConfig, load_config, sub_seed
from .cost import total_bops
from .errors import ConfigurationError, InvariantError, WinQuantError
from .numerics import FeatureMap
from .quantization import sqnr_db
from .sampling import draw_seed, naive_codes, uniform_sum_codes
from .search import ModelEvaluator, ParetoPoint, nsga2_search, pareto_filter
from .windowing import partition

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_ratios(text: str, n_pairs: int, mode: Mode) -> CompressionConfig:
    """``r1,...,rn`` or ``r1,...,rn:p1,...,pn``; a single value is broadcast."""

    def vector(part: str) -> list[float]:
        try:
            vals = [float(v) for v in part.split(",") if v.strip()]
        except ValueError:
            raise ConfigurationError(f"cannot parse ratios {part!r}") from None
        if len(vals) == 1:
            vals *= n_pairs
        if len(vals) != n_pairs:
            raise ConfigurationError(f"expected {n_pairs} ratios, got {len(vals)}")
        return vals

    head, sep, tail = text.partition(":")
    pruning = vector(tail) if sep else None
    if pruning is not None and mode is Mode.MIXAQ:
        mode = Mode.MIXAQ_PRUNE
    return CompressionConfig.from_mode(vector(head), mode, pruning)


def _write(out_dir: Path, files: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out_dir / name).write_text(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class _Run:
    """Model, evaluation batch and cost model for one invocation."""

    def __init__(self, cfg: RunConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.spec = cfg.model_spec(seed=sub_seed(seed, "model"))
        self.cost_model = cfg.cost_model(self.spec)
        self._model: Model | None = None
        self._inputs: list[FeatureMap] | None = None

    @property
    def model(self) -> Model:
        if self._model is None:
            calib = random_input(self.spec, sub_seed(self.seed, "calibration"))
            self._model = build_model(self.spec, self.cfg.quant_bits(), calib)
        return self._model

    @property
    def inputs(self) -> list[FeatureMap]:
        if self._inputs is None:
            base = sub_seed(self.seed, "eval")
            self._inputs = [random_input(self.spec, draw_seed(base, i)) for i in range(self.cfg.search.eval_batch)]
        return self._inputs


def cmd_eval(run: _Run, config: CompressionConfig, reversed: bool) -> dict[str, str]:
    report = total_bops(run.cost_model, config)
    per_input = []
    for fm in run.inputs:
        ref = forward_float(run.model, fm)
        got = forward_mixed(run.model, fm, config, reversed)
        per_input.append([sqnr_db(a.data, b.data) for a, b in zip(ref.maps, got.maps)])
    per_stage = np.mean(per_input, axis=0)
    sqnr = {
        "config": config.to_dict(),
        "reversed_selection": reversed,
        "stages": [{"stage": i, "mean_sqnr_db": float(v)} for i, v in enumerate(per_stage)],
        "final_mean_sqnr_db": float(per_stage[-1]),
        "per_input_sqnr_db": per_input,
    }
    cost = {**report.to_dict(), "saving": report.saving, "config": config.to_dict(), "cost_mode": run.cfg.cost.mode}
    return {"cost_report.json": _json(cost), "sqnr.json": _json(sqnr)}


def _front_csv(points: Sequence[ParetoPoint], n_pairs: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["saving", "relative_cost", "quality_db"] + [f"r{i}" for i in range(n_pairs)] + [f"p{i}" for i in range(n_pairs)])
    for p in points:
        w.writerow([repr(p.saving), repr(p.relative_cost), repr(p.quality), *p.config.ratios, *p.config.pruning])
    return buf.getvalue()


def cmd_search(run: _Run, mode: Mode, reversed: bool, threads: int, snapshots: bool) -> dict[str, str]:
    s = run.cfg.search
    evaluator = ModelEvaluator(run.model, run.inputs, run.cost_model, reversed)
    history: list[dict] = []

    def record(gen: int, points: list[ParetoPoint]):
        if snapshots:
            front = sorted(pareto_filter(points), key=lambda p: (p.saving, -p.quality))
            history.append({"generation": gen, "front": [p.to_dict() for p in front]})

    front = nsga2_search(
        evaluator,
        run.spec.n_pairs,
        pop_size=s.pop_size,
        generations=s.generations,
        sampler=s.sampler,
        rng=np.random.default_rng(sub_seed(run.seed, "search")),
        mode=mode,
        sampler_config=run.cfg.sampler_config(run.spec.n_pairs),
        on_generation=record,
        threads=threads,
    )
    files = {
        "front.csv": _front_csv(front, run.spec.n_pairs),
        "front.json": _json({"mode": mode.value, "sampler": s.sampler, "front": [p.to_dict() for p in front]}),
    }
    if snapshots:
        files["snapshots.jsonl"] = "".join(json.dumps(h, sort_keys=True) + "\n" for h in history)
    return files


def window_sqnr(reference: FeatureMap, approx: FeatureMap, window_size: int) -> np.ndarray:
    ref = partition(reference, window_size).tokens
    got = partition(approx, window_size).tokens
    return np.array([sqnr_db(a, b) for a, b in zip(ref, got)])


def cmd_sqnr_map(run: _Run, config: CompressionConfig, baseline: CompressionConfig, reversed: bool) -> dict[str, str]:
    p = run.spec.window_size
    acc_cfg, acc_base = None, None
    first = None
    for fm in run.inputs:
        ref = forward_float(run.model, fm)
        got = forward_mixed(run.model, fm, config, reversed)
        base = forward_mixed(run.model, fm, baseline, reversed)
        a = [window_sqnr(r, g, p) for r, g in zip(ref.maps, got.maps)]
        b = [window_sqnr(r, g, p) for r, g in zip(ref.maps, base.maps)]
        acc_cfg = a if acc_cfg is None else [x + y for x, y in zip(acc_cfg, a)]
        acc_base = b if acc_base is None else [x + y for x, y in zip(acc_base, b)]
        if first is None:
            first = got
    k = len(run.inputs)
    stages = []
    for i, fm in enumerate(first.maps):
        ws = partition(fm, p)
        labels = first.assignments[i][0].labels()
        scores = first.scores[i].scores
        windows = []
        for w in range(ws.n_win):
            v_cfg, v_base = float(acc_cfg[i][w] / k), float(acc_base[i][w] / k)
            windows.append({
                "index": w,
                "origin": list(ws.origins[w]),
                "score": float(scores[w]),
                "branch": labels[w],
                "sqnr_db": v_cfg,
                "baseline_sqnr_db": v_base,
                "delta_db": v_cfg - v_base,
            })
        stages.append({"stage": i, "shape": list(fm.shape), "window_size": p, "n_windows": ws.n_win, "windows": windows})
    doc = {"config": config.to_dict(), "baseline": baseline.to_dict(), "reversed_selection": reversed, "stages": stages}
    return {"sqnr_map.json": _json(doc)}


def cmd_sample(run: _Run, count: int, mode: Mode) -> dict[str, str]:
    n = run.spec.n_pairs
    scfg = run.cfg.sampler_config(n)
    base = sub_seed(run.seed, "sample")
    lines = []
    for i in range(count):
        rng = np.random.default_rng(draw_seed(base, i))

        def draw() -> np.ndarray:
            return naive_codes(n, rng) if run.cfg.search.sampler == "naive" else uniform_sum_codes(scfg, rng)

        codes = draw()
        if mode is Mode.MIXAQ:
            cfg = CompressionConfig.from_codes(codes)
        elif mode is Mode.PRUNE:
            cfg = CompressionConfig.from_codes([0] * n, codes)
        else:
            cfg = CompressionConfig.from_codes(codes, np.minimum(draw(), GRID_STEPS - codes))
        lines.append(json.dumps({"index": i, "sum_code": int(sum(codes)), **cfg.to_dict()}, sort_keys=True) + "\n")
    return {"samples.jsonl": "".join(lines)}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("--out", default=None, help="output directory (overrides the config)")
    common.add_argument("--mode", choices=[m.value for m in Mode], default=None)
    common.add_argument("--reversed-selection", action="store_true", help="route the most important windows low")
    common.add_argument("--threads", type=int, default=1)

    parser = _Parser(prog="winquant", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("eval", parents=[common], help="cost report and per-stage SQNR for one config")
    p.add_argument("--ratios", default="0", help="r1,...,rn[:p1,...,pn]")
    p = sub.add_parser("search", parents=[common], help="NSGA-II search for a Pareto front")
    p.add_argument("--snapshots", action="store_true", help="also write per-generation fronts")
    p.add_argument("--generations", type=int, default=None)
    p.add_argument("--pop-size", type=int, default=None)
    p = sub.add_parser("sqnr-map", parents=[common], help="per-window SQNR against a baseline config")
    p.add_argument("--ratios", default="0")
    p.add_argument("--baseline-ratios", default="0")
    p = sub.add_parser("sample", parents=[common], help="draw compression configs as JSON lines")
    p.add_argument("--count", type=int, default=10)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "search" and (args.generations is not None or args.pop_size is not None):
            search = cfg.search.model_copy(update={
                k: v for k, v in (("generations", args.generations), ("pop_size", args.pop_size)) if v is not None
            })
            cfg = cfg.model_copy(update={"search": search})
        if args.threads < 1:
            raise ConfigurationError("--threads must be at least 1")
        seed = cfg.seed if args.seed is None else args.seed
        if seed < 0:
            raise ConfigurationError("--seed must be non-negative")
        mode = Mode(args.mode) if args.mode else cfg.search.mode
        run = _Run(cfg, seed)
        n = run.spec.n_pairs
        if args.command == "eval":
            files = cmd_eval(run, parse_ratios(args.ratios, n, mode), args.reversed_selection)
        elif args.command == "search":
            files = cmd_search(run, mode, args.reversed_selection, args.threads, args.snapshots)
        elif args.command == "sqnr-map":
            files = cmd_sqnr_map(
                run, parse_ratios(args.ratios, n, mode), parse_ratios(args.baseline_ratios, n, mode), args.reversed_selection
            )
        else:
            if args.count < 0:
                raise ConfigurationError("--count must be non-negative")
            files = cmd_sample(run, args.count, mode)
        _write(Path(args.out or cfg.outputs.dir), files)
    except InvariantError as exc:
        print(f"winquant: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (WinQuantError, ValueError, RuntimeError) as exc:
        print(f"winquant: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
