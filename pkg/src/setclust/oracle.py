"""Same-topic decision sources: a label-driven simulated oracle and a remote
chat-completion backend. Both share the query ledger used for the
query-efficiency accounting.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field

import requests


@dataclass(frozen=True)
class MLGroupQuery:
    """Ask the oracle to partition candidate texts into same-topic groups."""

    ids: tuple[int, ...]
    texts: tuple[str, ...]

    def __post_init__(self):
        if len(self.ids) < 2:
            raise ValueError("an ML group query needs at least 2 texts")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("query ids must be distinct")
        if len(self.ids) != len(self.texts):
            raise ValueError("ids and texts must align")


@dataclass(frozen=True)
class MLGroupResponse:
    """Partition of the query positions 0..m-1 into disjoint groups."""

    groups: tuple[tuple[int, ...], ...]

    def canonical(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(g) for g in self.groups)


@dataclass(frozen=True)
class CLMembershipQuery:
    """Ask whether a candidate shares a topic with any current set member."""

    set_ids: tuple[int, ...]
    set_texts: tuple[str, ...]
    candidate_id: int
    candidate_text: str

    def __post_init__(self):
        if not self.set_ids:
            raise ValueError("set_ids must be nonempty")
        if self.candidate_id in self.set_ids:
            raise ValueError("candidate must not already be a member")


@dataclass(frozen=True)
class CLMembershipResponse:
    """``matched_index`` is None (no topic match) or a position in set_ids."""

    matched_index: int | None


@dataclass
class QueryLedger:
    """Monotone per-kind query counts plus an optional transcript."""

    ml_queries: int = 0
    cl_queries: int = 0
    consistency_queries: int = 0
    transcripts: list[dict] = field(default_factory=list)
    keep_transcripts: bool = False
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, kind: str, count: int = 1, entry: dict | None = None) -> None:
        with self._lock:
            if kind == "ml":
                self.ml_queries += count
            elif kind == "cl":
                self.cl_queries += count
            elif kind == "consistency":
                self.consistency_queries += count
            else:
                raise ValueError(f"unknown query kind {kind!r}")
            if self.keep_transcripts and entry is not None:
                self.transcripts.append(entry)

    @property
    def total(self) -> int:
        return self.ml_queries + self.cl_queries + self.consistency_queries


def _groups_from_pairs(m: int, same) -> tuple[tuple[int, ...], ...]:
    """Union-find transitive closure of pairwise same-topic verdicts."""
    parent = list(range(m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(m):
        for j in range(i + 1, m):
            if same(i, j):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    return tuple(tuple(g) for _, g in sorted(groups.items()))


class SimulatedOracle:
    """Ground-truth oracle with an independent pairwise error rate.

    Each elementary same-topic decision (an unordered pair of texts inside a
    query) starts from label equality and flips with probability
    ``error_rate``; groups are the transitive closure of the pairwise
    verdicts. All randomness is derived from a content hash of
    (seed, query contents, pair, repeat index), so replaying the identical
    query with the same repeat index is bit-identical, while distinct
    queries or repeat indices flip independently when error_rate > 0.
    """

    def __init__(self, labels_by_id: dict[int, int], error_rate: float = 0.0, seed: int = 0,
                 ledger: QueryLedger | None = None):
        if not 0.0 <= error_rate <= 1.0:
            raise ValueError("error_rate must lie in [0, 1]")
        self.labels = dict(labels_by_id)
        self.error_rate = error_rate
        self.seed = seed
        self.ledger = ledger if ledger is not None else QueryLedger()

    def _unit(self, *key) -> float:
        payload = json.dumps([self.seed, *key], sort_keys=True).encode()
        digest = hashlib.blake2b(payload, digest_size=8).digest()
        return int.from_bytes(digest, "big") / 2**64

    def _same(self, id_a: int, id_b: int, repeat: int, context: tuple) -> bool:
        truth = self.labels[id_a] == self.labels[id_b]
        lo, hi = min(id_a, id_b), max(id_a, id_b)
        if self._unit("pair", list(context), lo, hi, repeat) < self.error_rate:
            return not truth
        return truth

    def query_ml_group(self, query: MLGroupQuery, repeat: int = 0,
                       kind: str = "ml") -> MLGroupResponse:
        context = ("ml", *query.ids)
        groups = _groups_from_pairs(
            len(query.ids),
            lambda i, j: self._same(query.ids[i], query.ids[j], repeat, context),
        )
        self.ledger.record(kind, 1, {"kind": "ml", "ids": list(query.ids),
                                     "groups": [list(g) for g in groups]})
        return MLGroupResponse(groups=groups)

    def query_cl_membership(self, query: CLMembershipQuery, repeat: int = 0,
                            kind: str = "cl") -> CLMembershipResponse:
        matched = None
        context = ("cl", *query.set_ids, query.candidate_id)
        for pos, member in enumerate(query.set_ids):
            if self._same(member, query.candidate_id, repeat, context):
                matched = pos
                break
        self.ledger.record(kind, 1, {"kind": "cl", "set_ids": list(query.set_ids),
                                     "candidate": query.candidate_id, "matched": matched})
        return CLMembershipResponse(matched_index=matched)


def consistency_repeat(oracle, query: MLGroupQuery, alpha: int) -> bool:
    """True iff ``alpha`` repeated queries return the identical partition.

    Comparison is order-insensitive; the ledger's consistency count grows by
    alpha regardless of the outcome.
    """
    if alpha < 1:
        raise ValueError("alpha >= 1 required")
    seen = None
    consistent = True
    for rep in range(alpha):
        resp = oracle.query_ml_group(query, repeat=rep, kind="consistency")
        canon = resp.canonical()
        if seen is None:
            seen = canon
        elif canon != seen:
            consistent = False
    return consistent


ML_PROMPT = (
    "You will be given a numbered list of short texts. Group together the texts "
    "that are about the same topic. Every index must appear in exactly one group. "
    "Answer with one line per group in the form 'GROUP: i, j, k' and nothing else.\n\n{items}"
)

CL_PROMPT = (
    "Here is a set of short texts, each about a different topic:\n{members}\n\n"
    "Candidate text: {candidate}\n\n"
    "If the candidate is about the same topic as one of the numbered texts, answer "
    "'MATCH: i' with that text's number. Otherwise answer 'NONE'."
)


class OracleBackendError(RuntimeError):
    """Transport or parse failure that survived all retries."""


def parse_ml_response(content: str, m: int) -> MLGroupResponse:
    groups: list[tuple[int, ...]] = []
    seen: set[int] = set()
    for line in content.splitlines():
        line = line.strip()
        if not line.upper().startswith("GROUP:"):
            continue
        try:
            members = tuple(int(tok) for tok in line.split(":", 1)[1].replace(",", " ").split())
        except ValueError as exc:
            raise OracleBackendError(f"unparseable group line {line!r}") from exc
        if not members:
            raise OracleBackendError(f"empty group line {line!r}")
        groups.append(members)
        for idx in members:
            if idx in seen or not 0 <= idx < m:
                raise OracleBackendError(f"index {idx} repeated or out of range in {content!r}")
            seen.add(idx)
    if seen != set(range(m)):
        raise OracleBackendError(f"groups do not cover all indices in {content!r}")
    return MLGroupResponse(groups=tuple(groups))


def parse_cl_response(content: str, set_size: int) -> CLMembershipResponse:
    text = content.strip()
    if text.upper().startswith("NONE"):
        return CLMembershipResponse(matched_index=None)
    if text.upper().startswith("MATCH:"):
        try:
            idx = int(text.split(":", 1)[1].strip().split()[0])
        except (ValueError, IndexError) as exc:
            raise OracleBackendError(f"unparseable match line {text!r}") from exc
        if not 0 <= idx < set_size:
            raise OracleBackendError(f"match index {idx} out of range")
        return CLMembershipResponse(matched_index=idx)
    raise OracleBackendError(f"unrecognized verdict {content!r}")


class RemoteOracle:
    """Chat-completion backend speaking JSON over HTTPS.

    Endpoint and key come from ORACLE_API_URL / ORACLE_API_KEY; each query is
    retried up to ``max_attempts`` times with exponential backoff, and an
    unparseable response after retries is an error, never silently dropped.
    ``send`` is injectable for testing; at most ``max_in_flight`` requests run
    concurrently.
    """

    def __init__(self, model: str, temperature: float = 0.0, max_attempts: int = 3,
                 backoff: float = 1.0, max_in_flight: int = 4,
                 ledger: QueryLedger | None = None, send=None,
                 transcript_path: str | None = None):
        self.model = model
        self.temperature = temperature
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.ledger = ledger if ledger is not None else QueryLedger()
        self._send = send if send is not None else self._http_send
        self._gate = threading.Semaphore(max_in_flight)
        self.transcript_path = transcript_path
        self._transcript_lock = threading.Lock()

    def _http_send(self, payload: dict) -> str:
        url = os.environ.get("ORACLE_API_URL")
        key = os.environ.get("ORACLE_API_KEY")
        if not url:
            raise OracleBackendError("ORACLE_API_URL is not set")
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        resp = requests.post(url, json=payload, headers=headers, timeout=120)
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]

    def _chat(self, prompt: str, parse, context: dict):
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            start = time.monotonic()
            try:
                with self._gate:
                    content = self._send(payload)
                result = parse(content)
            except Exception as exc:  # noqa: BLE001 - retried, then surfaced
                last_error = exc
                time.sleep(self.backoff * 2**attempt if self.backoff else 0)
                continue
            self._log({**context, "request": payload, "response": content,
                       "latency_ms": round(1000 * (time.monotonic() - start), 1)})
            return result
        raise OracleBackendError(
            f"backend failed after {self.max_attempts} attempts: {last_error}"
        ) from last_error

    def _log(self, entry: dict) -> None:
        if self.transcript_path is None:
            return
        with self._transcript_lock, open(self.transcript_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry) + "\n")

    def query_ml_group(self, query: MLGroupQuery, repeat: int = 0,
                       kind: str = "ml") -> MLGroupResponse:
        items = "\n".join(f"{i}. {t}" for i, t in enumerate(query.texts))
        prompt = ML_PROMPT.format(items=items)
        result = self._chat(prompt, lambda c: parse_ml_response(c, len(query.ids)),
                            {"kind": "ml", "ids": list(query.ids), "repeat": repeat})
        self.ledger.record(kind, 1)
        return result

    def query_cl_membership(self, query: CLMembershipQuery, repeat: int = 0,
                            kind: str = "cl") -> CLMembershipResponse:
        members = "\n".join(f"{i}. {t}" for i, t in enumerate(query.set_texts))
        prompt = CL_PROMPT.format(members=members, candidate=query.candidate_text)
        result = self._chat(prompt, lambda c: parse_cl_response(c, len(query.set_ids)),
                            {"kind": "cl", "candidate": query.candidate_id, "repeat": repeat})
        self.ledger.record(kind, 1)
        return result
