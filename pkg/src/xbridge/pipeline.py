"""End-to-end estimator: categorize, infer candidates, examine, pair."""

from __future__ import annotations

import logging
from typing import Any, Mapping

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .abi import AbiRegistry, decode_instance
from .categorize import categorize
from .examiner import ExaminationReport, examine
from .inference import LexicalProvider, Provider, RoleLexicon, infer_candidates
from .model import CandidateQuintuple, Category, PairingParams, Quintuple, Side
from .pairing import Scores, pair_all, score
from .validation import check_instances, check_truth

logger = logging.getLogger(__name__)


class InstanceDecoder(TransformerMixin, BaseEstimator):
    """Turns raw ``(tx, logs)`` records into decoded instances using an ABI registry."""

    def __init__(self, registry: AbiRegistry | None = None, side: Side = Side.SOURCE, strict: bool = False):
        self.registry = registry
        self.side = side
        self.strict = strict

    def fit(self, X=None, y=None):
        self.registry_ = self.registry if self.registry is not None else AbiRegistry()
        self.diagnostics_: list[str] = []
        return self

    def transform(self, X):
        check_is_fitted(self, "registry_")
        out = []
        for raw in X:
            logs = raw.get("logs", [])
            out.append(
                decode_instance(
                    raw, logs, self.registry_, side=Side(self.side), strict=self.strict, diagnostics=self.diagnostics_
                )
            )
        return out


class BridgePairer(BaseEstimator):
    """Learns one identifier quintuple per category and pairs source with destination transactions.

    ``fit`` needs both sides because the examiner looks for counterpart
    transactions on the other chain. ``predict`` may be called on new data
    whose categories were seen during ``fit``.
    """

    def __init__(
        self,
        timewindow: int = 7200,
        fee_rate: float = 0.2,
        chain_alias: Mapping[int, int] | None = None,
        token_alias: Mapping[tuple[int, str], str] | None = None,
        provider: Provider | None = None,
        lexicon: RoleLexicon | None = None,
        n_samples: int = 3,
        top_k: int = 5,
        prefilter: bool = False,
        validation_sample: int = 200,
        symmetric: bool = False,
        max_in_flight: int = 4,
        random_state: int = 0,
    ):
        self.timewindow = timewindow
        self.fee_rate = fee_rate
        self.chain_alias = chain_alias
        self.token_alias = token_alias
        self.provider = provider
        self.lexicon = lexicon
        self.n_samples = n_samples
        self.top_k = top_k
        self.prefilter = prefilter
        self.validation_sample = validation_sample
        self.symmetric = symmetric
        self.max_in_flight = max_in_flight
        self.random_state = random_state

    def _params(self) -> PairingParams:
        return PairingParams(
            timewindow=self.timewindow,
            fee_rate=self.fee_rate,
            chain_alias=dict(self.chain_alias or {}),
            token_alias=dict(self.token_alias or {}),
        )

    def _provider(self) -> Provider:
        if self.provider is not None:
            return self.provider
        return LexicalProvider(self.lexicon or RoleLexicon.load(), k=self.top_k)

    def fit(self, X_src, X_dst, candidates: Mapping[str, CandidateQuintuple] | None = None):
        """Infer and examine quintuples for both sides.

        ``candidates`` lets a caller reuse previously inferred candidates, so
        parameter sweeps need not query the provider again.
        """
        X_src = check_instances(X_src, Side.SOURCE)
        X_dst = check_instances(X_dst, Side.DESTINATION)
        self.params_ = self._params()
        self.categories_: dict[Side, list[Category]] = {
            Side.SOURCE: [c for c in categorize(X_src) if c.pairable],
            Side.DESTINATION: [c for c in categorize(X_dst) if c.pairable],
        }
        if candidates is None:
            provider = self._provider()
            candidates = {}
            for side in Side:
                candidates.update(
                    infer_candidates(
                        self.categories_[side],
                        provider,
                        k=self.top_k,
                        n_samples=self.n_samples,
                        prefilter=self.prefilter,
                        seed=self.random_state,
                        max_in_flight=self.max_in_flight,
                    )
                )
        self.candidates_ = dict(candidates)
        self.report_ = self._examine(X_src, X_dst)
        self.quintuples_: dict[Side, dict[str, Quintuple]] = {s: r.quintuples for s, r in self.report_.items()}
        return self

    def _examine(self, X_src, X_dst) -> dict[Side, ExaminationReport]:
        d_cands = {k: cq.paths("D") for k, cq in self.candidates_.items()}
        data = {Side.SOURCE: X_src, Side.DESTINATION: X_dst}
        out = {}
        for side in Side:
            out[side] = examine(
                self.candidates_,
                self.categories_[side],
                data[side.other()],
                d_cands,
                self.params_,
                side=side,
                symmetric=self.symmetric,
                validation_sample=self.validation_sample,
                seed=self.random_state,
            )
        return out

    def refit_params(self, X_src, X_dst, **params: Any) -> "BridgePairer":
        """Re-run examination with new parameters, keeping the inferred candidates."""
        check_is_fitted(self, "candidates_")
        self.set_params(**params)
        return self.fit(X_src, X_dst, candidates=self.candidates_)

    def predict(self, X_src, X_dst, *, consume: bool = True) -> list:
        check_is_fitted(self, "quintuples_")
        X_src = check_instances(X_src, Side.SOURCE)
        X_dst = check_instances(X_dst, Side.DESTINATION)
        self.diagnostics_: list[str] = []
        return pair_all(
            X_src,
            X_dst,
            self.quintuples_[Side.SOURCE],
            self.quintuples_[Side.DESTINATION],
            self.params_,
            consume=consume,
            diagnostics=self.diagnostics_,
        )

    def evaluate(self, X_src, X_dst, truth) -> Scores:
        return score(self.predict(X_src, X_dst), check_truth(truth))

    def score(self, X_src, X_dst, truth) -> float:
        return self.evaluate(X_src, X_dst, truth).f1

    def fit_predict(self, X_src, X_dst) -> list:
        return self.fit(X_src, X_dst).predict(X_src, X_dst)
