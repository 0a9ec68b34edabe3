"""Candidate quintuple inference per category.

Providers map a category to per-role candidate fields with confidences. The
lexical provider scores field names against a weighted role lexicon; the LLM
provider posts a structured prompt to an HTTP endpoint and falls back to the
lexical provider when the endpoint misbehaves.
"""

from __future__ import annotations

import json
import logging
import math
import random
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence

import httpx
from pydantic import BaseModel, Field, ValidationError

from .model import ROLES, CandidateQuintuple, Category, FieldPath, TransactionInstance, canonical_address, value_kind

logger = logging.getLogger(__name__)

ProviderResponse = dict[str, list[tuple[FieldPath, float]]]

ROLE_ALIASES = {
    "d": "D",
    "to": "D",
    "destination": "D",
    "c": "C",
    "chain": "C",
    "t": "T",
    "token": "T",
    "a": "A",
    "amount": "A",
    "ts": "Ts",
    "timestamp": "Ts",
}


def _data_text(name: str) -> str:
    return resources.files("xbridge.data").joinpath(name).read_text()


@dataclass
class RoleLexicon:
    """Weighted terms per role, loaded from a JSON file."""

    terms: dict[str, dict[str, float]]

    def __post_init__(self):
        for role in ROLES:
            weights = self.terms.setdefault(role, {})
            for term, w in weights.items():
                if not 0.0 < w <= 1.0:
                    raise ValueError(f"lexicon weight for {role}/{term} must lie in (0, 1]")
        self.terms = {r: {t.lower(): float(w) for t, w in ws.items()} for r, ws in self.terms.items()}

    @classmethod
    def load(cls, path: str | Path | None = None) -> "RoleLexicon":
        text = Path(path).read_text() if path else _data_text("lexicon.json")
        return cls(json.loads(text))

    def norm(self, role: str) -> float:
        return math.sqrt(sum(w * w for w in self.terms[role].values()))


_WORD_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")


def tokenize_path(path: FieldPath | str) -> list[str]:
    """Split a rendered path into lowercase words on brackets, dots, underscores and camel case."""
    text = path.render() if isinstance(path, FieldPath) else path
    words = []
    for part in re.split(r"[\[\].#_\s]+", text):
        words.extend(w.lower() for w in _WORD_RE.findall(part) if not w.isdigit())
    return words


def lexical_scores(paths: Sequence[FieldPath], lexicon: RoleLexicon, role: str) -> dict[FieldPath, float]:
    """Cosine similarity between each path's term frequencies and the role's weighted terms."""
    weights = lexicon.terms[role]
    rnorm = lexicon.norm(role)
    out = {}
    for p in paths:
        tf = Counter(tokenize_path(p))
        if not tf or not rnorm:
            out[p] = 0.0
            continue
        dot = sum(weights.get(t, 0.0) * n for t, n in tf.items())
        out[p] = dot / (rnorm * math.sqrt(sum(n * n for n in tf.values())))
    return out


def lexical_propose(cat: Category | Sequence[FieldPath | str], lexicon: RoleLexicon, k: int = 5) -> ProviderResponse:
    """Top-k fields per role by lexical similarity; confidence is the score over the role's best score.

    Fields with zero similarity are never proposed.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if isinstance(cat, Category):
        paths = cat.paths
    else:
        paths = [p if isinstance(p, FieldPath) else FieldPath.parse(p) for p in cat]
    out: ProviderResponse = {}
    for role in ROLES:
        scores = lexical_scores(paths, lexicon, role)
        ranked = sorted(((s, p) for p, s in scores.items() if s > 0), key=lambda e: (-e[0], e[1].render().encode()))
        top = ranked[:k]
        best = top[0][0] if top else 1.0
        out[role] = [(p, round(s / best, 6)) for s, p in top]
    return out


def sample_category(cat: Category, n: int = 3, seed: int = 0) -> list[TransactionInstance]:
    """Deterministic sample of up to ``n`` members, independent of member order."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not cat.members:
        raise ValueError("cannot sample an empty category")
    members = sorted(cat.members, key=lambda tx: (tx.timestamp, tx.tx_hash))
    if len(members) <= n:
        return members
    rng = random.Random(f"{seed}:{cat.key}")
    idx = sorted(rng.sample(range(len(members)), n))
    return [members[i] for i in idx]


ROLE_KINDS = {"D": {"address", "text"}, "T": {"address", "text"}, "A": {"uint"}, "C": {"uint"}, "Ts": {"uint"}}


def type_prefilter(cat: Category, sample: Sequence[TransactionInstance]) -> dict[str, set[FieldPath]]:
    """Fields whose sampled values all have a kind that fits the role."""
    if not sample:
        raise ValueError("prefilter needs a non-empty sample")
    kinds: dict[FieldPath, set[str]] = {}
    for tx in sample:
        for p, v in tx.leaf_map.items():
            kind = value_kind(v)
            # padded 32-byte words carrying an address count as addresses, as in extraction
            if kind == "bytes" and canonical_address(v) is not None:
                kind = "address"
            kinds.setdefault(p, set()).add(kind)
    fields = set(cat.paths)
    allowed = {}
    for role in ROLES:
        allowed[role] = {
            p for p, ks in kinds.items() if p in fields and len(ks) == 1 and next(iter(ks)) in ROLE_KINDS[role]
        }
    return allowed


# ---------------------------------------------------------------------------
# providers


class Provider(Protocol):
    def propose(self, cat: Category, sample: Sequence[TransactionInstance]) -> ProviderResponse: ...


class LexicalProvider:
    def __init__(self, lexicon: RoleLexicon | None = None, k: int = 5):
        self.lexicon = lexicon or RoleLexicon.load()
        self.k = k
        self.diagnostics: list[str] = []

    def propose(self, cat, sample):
        return lexical_propose(cat, self.lexicon, self.k)


class _Candidate(BaseModel):
    field: str
    confidence: float = Field(ge=0.0, le=1.0)


class MalformedResponse(ValueError):
    pass


OUTPUT_SCHEMA = (
    "Reply with a single JSON object and nothing else. Keys are the roles "
    '"D", "C", "T", "A", "Ts"; each value is a list of candidates ordered from '
    'most to least likely, each candidate {"field": <field exactly as written '
    'in the instance>, "confidence": <number between 0 and 1>}. List at most '
    "five candidates per role."
)


def _first_json_object(text: str) -> Any:
    dec = json.JSONDecoder()
    for m in re.finditer(r"\{", text):
        try:
            obj, _ = dec.raw_decode(text, m.start())
            return obj
        except json.JSONDecodeError:
            continue
    raise MalformedResponse("no JSON object in response")


def parse_llm_body(body: str) -> dict[str, list[_Candidate]]:
    """Extract and validate the role -> candidates object from a response body."""
    try:
        obj = json.loads(body)
    except json.JSONDecodeError:
        obj = _first_json_object(body)
    if isinstance(obj, dict) and not any(k.lower() in ROLE_ALIASES for k in obj):
        for key in ("completion", "text", "content", "output"):
            if isinstance(obj.get(key), str):
                obj = _first_json_object(obj[key])
                break
    if not isinstance(obj, dict):
        raise MalformedResponse("response is not a JSON object")
    out: dict[str, list[_Candidate]] = {}
    for key, entries in obj.items():
        role = ROLE_ALIASES.get(key.lower())
        if role is None:
            continue
        if not isinstance(entries, list):
            raise MalformedResponse(f"role {key} is not a list")
        try:
            out[role] = [_Candidate.model_validate(e) for e in entries]
        except ValidationError as exc:
            raise MalformedResponse(str(exc)) from None
    if not out:
        raise MalformedResponse("response names no roles")
    return out


def _render_value(v: Any) -> str:
    kind = value_kind(v)
    if kind == "address":
        return str(v)
    if kind == "bytes":
        h = bytes(v).hex()
        return "0x" + (h if len(h) <= 96 else h[:96] + "...")
    return repr(v) if kind == "text" else str(v)


def render_sample(sample: Sequence[TransactionInstance]) -> str:
    blocks = []
    for i, tx in enumerate(sample, 1):
        lines = [f"Instance {i} ({tx.side.value} chain {tx.chain}):"]
        lines += [f"  {p.render()} = {_render_value(v)}" for p, v in tx.leaf_map.items()]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def build_prompt(sample: Sequence[TransactionInstance], template: str | None = None, fewshot: str | None = None) -> str:
    template = template if template is not None else _data_text("prompt_template.txt")
    fewshot = fewshot if fewshot is not None else _data_text("fewshot.txt")
    return (
        template.replace("{{FEWSHOT}}", fewshot.strip())
        .replace("{{SCHEMA}}", OUTPUT_SCHEMA)
        .replace("{{SAMPLE}}", render_sample(sample))
    )


@dataclass
class LLMProvider:
    """Client for an external completion endpoint.

    Posts ``{"model", "prompt", "max_tokens"}`` and expects a body holding one
    JSON object ``{role: [{"field", "confidence"}]}``. A malformed reply or a
    transport error is retried once; after that the fallback provider answers.
    """

    endpoint: str
    model: str = "default"
    max_tokens: int = 1024
    timeout: float = 60.0
    retries: int = 1
    template_path: str | None = None
    fewshot_path: str | None = None
    headers: dict[str, str] = field(default_factory=dict)
    transport: httpx.BaseTransport | None = None
    fallback: Provider | None = None
    diagnostics: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.fallback is None:
            self.fallback = LexicalProvider()
        self._template = Path(self.template_path).read_text() if self.template_path else None
        self._fewshot = Path(self.fewshot_path).read_text() if self.fewshot_path else None

    def _query(self, client: httpx.Client, prompt: str) -> dict[str, list[_Candidate]]:
        resp = client.post(
            self.endpoint,
            json={"model": self.model, "prompt": prompt, "max_tokens": self.max_tokens},
        )
        resp.raise_for_status()
        return parse_llm_body(resp.text)

    def propose(self, cat: Category, sample: Sequence[TransactionInstance]) -> ProviderResponse:
        prompt = build_prompt(sample, self._template, self._fewshot)
        fields = set(cat.field_set)
        with httpx.Client(transport=self.transport, timeout=self.timeout, headers=self.headers) as client:
            for attempt in range(self.retries + 1):
                try:
                    parsed = self._query(client, prompt)
                    break
                except (httpx.HTTPError, MalformedResponse) as exc:
                    self.diagnostics.append(f"{cat.key[:12]}: attempt {attempt + 1} failed: {exc}")
                    logger.warning("provider attempt %d for %s failed: %s", attempt + 1, cat.key[:12], exc)
            else:
                self.diagnostics.append(f"{cat.key[:12]}: falling back to {type(self.fallback).__name__}")
                logger.warning("falling back to %s for %s", type(self.fallback).__name__, cat.key[:12])
                return self.fallback.propose(cat, sample)

        out: ProviderResponse = {}
        for role in ROLES:
            kept = []
            for cand in parsed.get(role, []):
                if cand.field not in fields:
                    self.diagnostics.append(f"{cat.key[:12]}: dropped unknown field {cand.field!r} for {role}")
                    continue
                kept.append((FieldPath.parse(cand.field), cand.confidence))
            out[role] = kept
        return out


# ---------------------------------------------------------------------------
# composition


def compose_candidates(
    response: Mapping[str, Sequence[tuple[FieldPath, float]]],
    k: int = 5,
    allowed: Mapping[str, set[FieldPath]] | None = None,
) -> CandidateQuintuple:
    """Keep the provider's top-k per role, intersected with the prefilter when given.

    A role left empty by the intersection widens to the whole prefilter set
    with uniform confidence; a role that is still empty marks the category
    uninferable.
    """
    roles: dict[str, list[tuple[FieldPath, float]]] = {}
    for role in ROLES:
        ranked = sorted(response.get(role, []), key=lambda e: (-e[1], e[0].render()))
        top, seen = [], set()
        for p, c in ranked:
            if p not in seen:
                seen.add(p)
                top.append((p, c))
        top = top[:k]
        if allowed is not None:
            top = [(p, c) for p, c in top if p in allowed[role]]
            if not top and allowed[role]:
                conf = 1.0 / len(allowed[role])
                top = [(p, conf) for p in sorted(allowed[role])]
        roles[role] = top
    cq = CandidateQuintuple(roles)
    cq.uninferable = not cq.complete
    return cq


def infer_candidates(
    categories: Sequence[Category],
    provider: Provider,
    *,
    k: int = 5,
    n_samples: int = 3,
    prefilter: bool = False,
    seed: int = 0,
    max_in_flight: int = 4,
) -> dict[str, CandidateQuintuple]:
    """Candidate quintuples keyed by category key; categories run concurrently."""

    def one(cat: Category) -> tuple[str, CandidateQuintuple]:
        sample = sample_category(cat, n_samples, seed)
        allowed = type_prefilter(cat, sample) if prefilter else None
        return cat.key, compose_candidates(provider.propose(cat, sample), k, allowed)

    cats = [c for c in categories if c.members]
    if isinstance(provider, LexicalProvider) or max_in_flight <= 1 or len(cats) <= 1:
        results = [one(c) for c in cats]
    else:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(pool.map(one, cats))
    return dict(sorted(results))
