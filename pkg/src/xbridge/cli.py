"""Command line entry point: ``xbridge <command> [--config FILE] [--out DIR]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import harness
from .abi import AbiError, AbiRegistry, decode_instance
from .categorize import categorize, combination_count
from .inference import LexicalProvider, LLMProvider, RoleLexicon, infer_candidates
from .io import DataError, load_instances, load_truth_pairs, read_jsonl, save_instances, save_pairs
from .model import CandidateQuintuple, PairingParams, Quintuple, Side
from .pairing import pair_all, score
from .pipeline import BridgePairer
from .simulator import ScenarioConfig, ScenarioError, clean_config, decoy_config, generate, motivating_config, write_scenario

logger = logging.getLogger("xbridge")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


class ConfigError(ValueError):
    pass


class ProviderConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    endpoint: str
    model: str = "default"
    max_tokens: int = Field(1024, gt=0)
    timeout: float = Field(60.0, gt=0)
    retries: int = Field(1, ge=0)
    template: str | None = None
    fewshot: str | None = None
    headers: dict[str, str] = {}


class SweepConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    timewindows: list[int] = list(harness.TIMEWINDOWS)
    fee_rates: list[float] = list(harness.FEE_RATES)


class RunConfig(BaseModel):
    """Schema of the ``--config`` JSON file."""

    model_config = ConfigDict(extra="forbid")
    params: dict[str, Any] = {}
    lexicon: str | None = None
    provider: ProviderConfig | None = None
    seed: int = 0
    n_samples: int = Field(3, ge=1)
    top_k: int = Field(5, ge=1)
    prefilter: bool = False
    validation_sample: int = Field(200, ge=0)
    symmetric: bool = False
    max_in_flight: int = Field(4, ge=1)
    scenario: dict[str, Any] = {}
    sweep: SweepConfig = SweepConfig()


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def _params(cfg: RunConfig, data_dir: Path | None) -> PairingParams:
    raw = dict(cfg.params)
    if data_dir is not None and (data_dir / "params.json").exists():
        base = json.loads((data_dir / "params.json").read_text())
        base.update(raw)
        raw = base
    try:
        return PairingParams.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid params: {exc}") from None


def _lexicon(cfg: RunConfig) -> RoleLexicon:
    try:
        return RoleLexicon.load(cfg.lexicon)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load lexicon: {exc}") from None


def _model(cfg: RunConfig, params: PairingParams) -> BridgePairer:
    lexicon = _lexicon(cfg)
    provider = None
    if cfg.provider is not None:
        p = cfg.provider
        provider = LLMProvider(
            endpoint=p.endpoint,
            model=p.model,
            max_tokens=p.max_tokens,
            timeout=p.timeout,
            retries=p.retries,
            template_path=p.template,
            fewshot_path=p.fewshot,
            headers=p.headers,
            fallback=LexicalProvider(lexicon, cfg.top_k),
        )
    return BridgePairer(
        timewindow=params.timewindow,
        fee_rate=params.fee_rate,
        chain_alias=params.chain_alias,
        token_alias=params.token_alias,
        provider=provider,
        lexicon=lexicon,
        n_samples=cfg.n_samples,
        top_k=cfg.top_k,
        prefilter=cfg.prefilter,
        validation_sample=cfg.validation_sample,
        symmetric=cfg.symmetric,
        max_in_flight=cfg.max_in_flight,
        random_state=cfg.seed,
    )


def _input(args, name: str, default: str) -> Path:
    given = getattr(args, name, None)
    if given:
        path = Path(given)
    elif args.data:
        path = Path(args.data) / default
    else:
        raise ConfigError(f"--{name} or --data is required")
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    return path


def _sides(args):
    src = load_instances(_input(args, "src", "src_instances.jsonl"))
    dst = load_instances(_input(args, "dst", "dst_instances.jsonl"))
    for tx in src:
        if tx.side is not Side.SOURCE:
            raise DataError(f"{tx.hash_hex} in the source file is marked {tx.side.value}")
    for tx in dst:
        if tx.side is not Side.DESTINATION:
            raise DataError(f"{tx.hash_hex} in the destination file is marked {tx.side.value}")
    return src, dst


def _write_json(path: Path, doc: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True))


def _load_candidates(path: Path) -> dict[str, CandidateQuintuple]:
    try:
        doc = json.loads(path.read_text())
        return {k: CandidateQuintuple.from_dict(v) for k, v in doc.items()}
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"cannot read candidates {path}: {exc}") from None


def _load_quintuples(path: Path) -> dict[Side, dict[str, Quintuple]]:
    try:
        doc = json.loads(path.read_text())
        return {s: {k: Quintuple.from_dict(q) for k, q in doc.get(s.value, {}).items()} for s in Side}
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"cannot read quintuples {path}: {exc}") from None


# ---------------------------------------------------------------------------
# commands

PRESETS = {"clean": clean_config, "decoy": decoy_config, "motivating": motivating_config}


def cmd_simulate(args, cfg: RunConfig, out: Path) -> dict:
    base = PRESETS[args.preset](seed=cfg.seed).to_dict()
    base.update(cfg.scenario)
    if args.transfers is not None:
        base["n_transfers"] = args.transfers
    try:
        scenario_cfg = ScenarioConfig.from_dict(base)
        sc = generate(scenario_cfg)
    except (ScenarioError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    write_scenario(sc, out)
    return {"src": len(sc.src), "dst": len(sc.dst), "pairs": len(sc.truth_pairs), "out": str(out)}


def cmd_decode(args, cfg: RunConfig, out: Path) -> dict:
    raw_path = Path(args.raw)
    if not raw_path.exists():
        raise DataError(f"input file not found: {raw_path}")
    abi_dir = Path(args.abis)
    if not abi_dir.is_dir():
        raise DataError(f"ABI directory not found: {abi_dir}")
    try:
        registry = AbiRegistry.from_dir(abi_dir)
    except (json.JSONDecodeError, AbiError, KeyError) as exc:
        raise DataError(f"cannot load ABIs: {exc}") from None
    side = Side.SOURCE if args.side == "src" else Side.DESTINATION
    diagnostics: list[str] = []
    txs = []
    for doc in read_jsonl(raw_path):
        try:
            txs.append(decode_instance(doc, doc.get("logs"), registry, side=side, strict=args.strict,
                                       diagnostics=diagnostics))
        except (KeyError, ValueError) as exc:
            raise DataError(f"malformed raw transaction: {exc}") from None
    target = out / f"{args.side}_instances.jsonl"
    save_instances(target, txs)
    (out / f"{args.side}_decode_diagnostics.txt").write_text("\n".join(diagnostics) + ("\n" if diagnostics else ""))
    return {"decoded": len(txs), "diagnostics": len(diagnostics), "out": str(target)}


def cmd_categorize(args, cfg: RunConfig, out: Path) -> dict:
    src, dst = _sides(args)
    doc = {}
    for side, txs in ((Side.SOURCE, src), (Side.DESTINATION, dst)):
        cats = categorize(txs)
        doc[side.value] = {
            "categories": [c.manifest() for c in cats],
            "combination_count": combination_count([c for c in cats if c.pairable]),
        }
    _write_json(out / "categories.json", doc)
    return {s: len(v["categories"]) for s, v in doc.items()}


def cmd_infer(args, cfg: RunConfig, out: Path) -> dict:
    src, dst = _sides(args)
    model = _model(cfg, _params(cfg, Path(args.data) if args.data else None))
    provider = model._provider()
    cands = {}
    for txs in (src, dst):
        cats = [c for c in categorize(txs) if c.pairable]
        cands.update(
            infer_candidates(cats, provider, k=cfg.top_k, n_samples=cfg.n_samples, prefilter=cfg.prefilter,
                             seed=cfg.seed, max_in_flight=cfg.max_in_flight)
        )
    _write_json(out / "candidates.json", {k: v.to_dict() for k, v in cands.items()})
    diags = getattr(provider, "diagnostics", [])
    if diags:
        (out / "provider_diagnostics.txt").write_text("\n".join(diags) + "\n")
    return {"categories": len(cands), "uninferable": sum(c.uninferable for c in cands.values())}


def cmd_examine(args, cfg: RunConfig, out: Path) -> dict:
    src, dst = _sides(args)
    model = _model(cfg, _params(cfg, Path(args.data) if args.data else None))
    cands = _load_candidates(Path(args.candidates)) if args.candidates else None
    model.fit(src, dst, candidates=cands)
    _write_json(out / "quintuples.json", {s.value: {k: q.to_dict() for k, q in model.quintuples_[s].items()} for s in Side})
    _write_json(out / "examination.json", {s.value: model.report_[s].to_dict() for s in Side})
    return {s.value: len(model.quintuples_[s]) for s in Side}


def cmd_pair(args, cfg: RunConfig, out: Path) -> dict:
    src, dst = _sides(args)
    params = _params(cfg, Path(args.data) if args.data else None)
    qpath = Path(args.quintuples) if args.quintuples else None
    if qpath is not None and not qpath.exists():
        raise DataError(f"input file not found: {qpath}")
    if qpath is None:
        model = _model(cfg, params).fit(src, dst)
        qs = model.quintuples_
    else:
        qs = _load_quintuples(qpath)
    diagnostics: list[str] = []
    pairs = pair_all(src, dst, qs[Side.SOURCE], qs[Side.DESTINATION], params, diagnostics=diagnostics)
    save_pairs(out / "pairs.jsonl", pairs)
    return {"pairs": len(pairs), "diagnostics": len(diagnostics)}


def cmd_evaluate(args, cfg: RunConfig, out: Path) -> dict:
    src, dst = _sides(args)
    truth = load_truth_pairs(_input(args, "truth", "truth_pairs.csv"))
    params = _params(cfg, Path(args.data) if args.data else None)
    model = _model(cfg, params).fit(src, dst)
    pairs = model.predict(src, dst)
    report: dict[str, Any] = {"pipeline": score(pairs, truth).as_dict()}
    report["ablation"] = [r.as_dict() for r in harness.ablation_report(model)]
    if args.baselines:
        anchor = _anchor(src, truth)
        if anchor is not None:
            report["chronological"] = score(harness.baseline_chronological(src, dst, anchor), truth).as_dict()
        lex = _lexicon(cfg)
        report["similarity"] = score(harness.baseline_similarity(src, dst, params, lexicon=lex), truth).as_dict()
        report["similarity_examined"] = score(
            harness.baseline_similarity(src, dst, params, lexicon=lex, with_examiner=True), truth
        ).as_dict()
        report["hybrid"] = score(harness.baseline_hybrid(src, dst, params, lexicon=lex), truth).as_dict()
    save_pairs(out / "pairs.jsonl", pairs)
    _write_json(out / "evaluation.json", report)
    return {k: v["f1"] for k, v in report.items() if isinstance(v, dict)}


def _anchor(src, truth) -> tuple[str, str] | None:
    by_src = dict(truth)
    for tx in sorted(src, key=lambda t: (t.timestamp, t.tx_hash)):
        if tx.hash_hex in by_src:
            return tx.hash_hex, by_src[tx.hash_hex]
    return None


def cmd_sweep(args, cfg: RunConfig, out: Path) -> dict:
    src, dst = _sides(args)
    truth = load_truth_pairs(_input(args, "truth", "truth_pairs.csv"))
    params = _params(cfg, Path(args.data) if args.data else None)
    cells = harness.sweep(
        src, dst, truth,
        timewindows=cfg.sweep.timewindows,
        fee_rates=cfg.sweep.fee_rates,
        base=_model(cfg, params),
        out_csv=out / "sweep.csv",
    )
    best = harness.best_cells(cells)
    return {"cells": len(cells), "best_f1": best[0].scores.f1, "best": [(c.timewindow, c.fee_rate) for c in best]}


COMMANDS = {
    "simulate": cmd_simulate,
    "decode": cmd_decode,
    "categorize": cmd_categorize,
    "infer": cmd_infer,
    "examine": cmd_examine,
    "pair": cmd_pair,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", default="xbridge-out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="scenario directory holding src/dst instance files and params.json")
    data.add_argument("--src", help="source-side instance JSONL")
    data.add_argument("--dst", help="destination-side instance JSONL")

    parser = argparse.ArgumentParser(prog="xbridge", description="Pair cross-chain bridge transactions.",
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic two-chain dataset")
    p.add_argument("--preset", choices=sorted(PRESETS), default="clean")
    p.add_argument("--transfers", type=int)

    p = sub.add_parser("decode", parents=[common], help="decode raw transactions with ABIs")
    p.add_argument("--raw", required=True)
    p.add_argument("--abis", required=True)
    p.add_argument("--side", choices=["src", "dst"], required=True)
    p.add_argument("--strict", action="store_true")

    sub.add_parser("categorize", parents=[common, data], help="group instances by field set")
    sub.add_parser("infer", parents=[common, data], help="propose candidate quintuples")
    p = sub.add_parser("examine", parents=[common, data], help="validate candidates into quintuples")
    p.add_argument("--candidates")
    p = sub.add_parser("pair", parents=[common, data], help="pair transactions")
    p.add_argument("--quintuples")
    p = sub.add_parser("evaluate", parents=[common, data], help="score against truth pairs")
    p.add_argument("--truth")
    p.add_argument("--baselines", action="store_true")
    p = sub.add_parser("sweep", parents=[common, data], help="timewindow x fee_rate grid")
    p.add_argument("--truth")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](args, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, AbiError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(json.dumps(summary, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
