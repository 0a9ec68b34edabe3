"""Baselines, search-space ablation and parameter sweeps."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import httpx

from .categorize import candidate_space_size, categorize, combination_count
from .inference import RoleLexicon, lexical_propose, sample_category, type_prefilter
from .model import ROLES, Category, PairingParams, Quintuple, Side, TransactionInstance
from .pairing import Scores, pair_all, score
from .pipeline import BridgePairer
from .validation import check_instances, check_params, check_truth

logger = logging.getLogger(__name__)

TIMEWINDOWS = (10, 60, 600, 3600, 7200, 10800)
FEE_RATES = (0.01, 0.05, 0.1, 0.15, 0.2)


def _ordered(txs: Iterable[TransactionInstance]) -> list[TransactionInstance]:
    return sorted(txs, key=lambda tx: (tx.timestamp, tx.tx_hash))


def baseline_chronological(
    tx_s: Sequence[TransactionInstance],
    tx_d: Sequence[TransactionInstance],
    anchor: tuple[str, str],
) -> list[tuple[str, str]]:
    """Pair both sides positionally in time order, starting from one known pair."""
    src, dst = _ordered(tx_s), _ordered(tx_d)
    a_s, a_d = anchor[0].lower(), anchor[1].lower()
    try:
        i = next(k for k, tx in enumerate(src) if tx.hash_hex == a_s)
        j = next(k for k, tx in enumerate(dst) if tx.hash_hex == a_d)
    except StopIteration:
        raise ValueError("anchor pair not found in the datasets") from None
    n = min(len(src) - i, len(dst) - j)
    return [(src[i + k].hash_hex, dst[j + k].hash_hex) for k in range(n)]


def _top1(categories: Sequence[Category], lexicon: RoleLexicon, k: int, prefilter: bool, seed: int) -> dict[str, Quintuple]:
    out = {}
    for cat in categories:
        proposed = lexical_propose(cat, lexicon, k)
        if prefilter:
            allowed = type_prefilter(cat, sample_category(cat, 3, seed))
            proposed = {r: [(p, c) for p, c in proposed[r] if p in allowed[r]] for r in ROLES}
        if all(proposed[r] for r in ROLES):
            out[cat.key] = Quintuple(**{r: proposed[r][0][0] for r in ROLES})
    return out


def baseline_similarity(
    tx_s: Sequence[TransactionInstance],
    tx_d: Sequence[TransactionInstance],
    params: PairingParams | Mapping | None = None,
    *,
    lexicon: RoleLexicon | None = None,
    k: int = 5,
    with_examiner: bool = False,
    prefilter: bool = False,
    seed: int = 0,
) -> list:
    """Pair with the lexically closest field per role.

    By default the top-ranked field is used directly. ``with_examiner``
    instead hands the top-k fields to the examiner, as the full pipeline does.
    """
    params = check_params(params)
    lexicon = lexicon or RoleLexicon.load()
    tx_s = check_instances(tx_s, Side.SOURCE)
    tx_d = check_instances(tx_d, Side.DESTINATION)
    if with_examiner:
        model = BridgePairer(
            timewindow=params.timewindow,
            fee_rate=params.fee_rate,
            chain_alias=params.chain_alias,
            token_alias=params.token_alias,
            lexicon=lexicon,
            top_k=k,
            prefilter=prefilter,
            random_state=seed,
        )
        return model.fit_predict(tx_s, tx_d)
    cats_s = [c for c in categorize(tx_s) if c.pairable]
    cats_d = [c for c in categorize(tx_d) if c.pairable]
    qs = _top1(cats_s, lexicon, k, prefilter, seed)
    qd = _top1(cats_d, lexicon, k, prefilter, seed)
    return pair_all(tx_s, tx_d, qs, qd, params)


def baseline_hybrid(
    tx_s: Sequence[TransactionInstance],
    tx_d: Sequence[TransactionInstance],
    params: PairingParams | Mapping | None = None,
    **kwargs: Any,
) -> list:
    """Type filtering first, then :func:`baseline_similarity`."""
    return baseline_similarity(tx_s, tx_d, params, prefilter=True, **kwargs)


@dataclass(frozen=True)
class AblationRow:
    side: str
    X: int
    Y: int
    survivors: int
    M: int

    def as_dict(self) -> dict:
        return {"side": self.side, "X": self.X, "Y": self.Y, "survivors": self.survivors, "M": self.M}


def ablation_report(model: BridgePairer) -> list[AblationRow]:
    """Search-space size per side after categorization, inference and examination."""
    rows = []
    for side in Side:
        cats = model.categories_[side]
        keys = {c.key for c in cats}
        cands = {k: v for k, v in model.candidates_.items() if k in keys}
        rows.append(
            AblationRow(
                side.value,
                combination_count(cats),
                candidate_space_size(cands),
                len(model.quintuples_[side]),
                len(cats),
            )
        )
    return rows


@dataclass(frozen=True)
class SweepCell:
    timewindow: int
    fee_rate: float
    scores: Scores

    def as_dict(self) -> dict:
        return {"timewindow": self.timewindow, "fee_rate": self.fee_rate, **self.scores.as_dict()}


def sweep(
    tx_s: Sequence[TransactionInstance],
    tx_d: Sequence[TransactionInstance],
    truth: Iterable,
    *,
    timewindows: Sequence[int] = TIMEWINDOWS,
    fee_rates: Sequence[float] = FEE_RATES,
    base: BridgePairer | None = None,
    out_csv: str | Path | None = None,
) -> list[SweepCell]:
    """F1 over a timewindow x fee_rate grid.

    Candidates are inferred once. Examination depends on the timewindow only,
    so it runs once per row; each fee rate then re-pairs.
    """
    truth = check_truth(truth)
    tx_s = check_instances(tx_s, Side.SOURCE)
    tx_d = check_instances(tx_d, Side.DESTINATION)
    model = base if base is not None else BridgePairer()
    candidates = getattr(model, "candidates_", None)
    cells = []
    for tw in timewindows:
        model.set_params(timewindow=tw, fee_rate=fee_rates[0])
        model.fit(tx_s, tx_d, candidates=candidates)
        candidates = model.candidates_
        for fee in fee_rates:
            params = PairingParams(tw, fee, model.params_.chain_alias, model.params_.token_alias)
            pairs = pair_all(tx_s, tx_d, model.quintuples_[Side.SOURCE], model.quintuples_[Side.DESTINATION], params)
            cells.append(SweepCell(tw, fee, score(pairs, truth)))
    if out_csv is not None:
        write_sweep_csv(cells, out_csv)
    return cells


def write_sweep_csv(cells: Sequence[SweepCell], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(cells[0].as_dict()) if cells else ["timewindow", "fee_rate", "f1"])
        writer.writeheader()
        for c in cells:
            writer.writerow(c.as_dict())


def best_cells(cells: Sequence[SweepCell]) -> list[SweepCell]:
    top = max(c.scores.f1 for c in cells)
    return [c for c in cells if c.scores.f1 == top]


def llm_whole_matching_demo(
    tx_s: Sequence[TransactionInstance],
    tx_d: Sequence[TransactionInstance],
    endpoint: str,
    *,
    transport: httpx.BaseTransport | None = None,
    limit: int = 20,
    timeout: float = 30.0,
) -> list[tuple[str, str]]:
    """Ask an endpoint to match raw transactions directly.

    Only a wiring demonstration: the prompt lists a few transactions of
    each side and the reply must be ``{"pairs": [[src_hash, dst_hash], ...]}``.
    Hashes not present in the prompt are dropped.
    """
    def brief(tx: TransactionInstance) -> dict:
        return {"hash": tx.hash_hex, "chain": tx.chain, "timestamp": tx.timestamp, "fields": len(tx.leaf_map)}

    src, dst = _ordered(tx_s)[:limit], _ordered(tx_d)[:limit]
    prompt = json.dumps({"task": "match source and destination transactions", "source": [brief(t) for t in src],
                         "destination": [brief(t) for t in dst]})
    with httpx.Client(transport=transport, timeout=timeout) as client:
        resp = client.post(endpoint, json={"prompt": prompt})
        resp.raise_for_status()
        body = resp.json()
    known_s, known_d = {t.hash_hex for t in src}, {t.hash_hex for t in dst}
    out = []
    for item in body.get("pairs", []):
        if isinstance(item, (list, tuple)) and len(item) == 2:
            s, d = str(item[0]).lower(), str(item[1]).lower()
            if s in known_s and d in known_d:
                out.append((s, d))
    return out
