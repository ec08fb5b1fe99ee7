# Copyright 2023 Cloudbase Solutions Srl
#
#    Licensed under the Apache License, Version 2.0 (the "License"); you may
#    not use this file except in compliance with the License. You may obtain
#    a copy of the License at
#
#         http://www.apache.org/licenses/LICENSE-2.0
#
#    Unless required by applicable law or agreed to in writing, software
#    distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
#    WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
#    License for the specific language governing permissions and limitations
#    under the License.

""" Fact base of certified statements and the induction rules chaining them
into conclusions about T(n, 3; s_1(n)) and T(n, 3; s_2(n)). """

import abc
import dataclasses
import enum
import logging
import os
from typing import Callable, Iterable

import yaml

from secantcert import geometry
from secantcert import verifier
from secantcert.geometry import Statement, CUBIC
from secantcert.monomials import DEFAULT_BLOCK_WIDTH


LOG = logging.getLogger(__name__)

SMALL_N_AXIOM_MAX_N = 9
# Number of constrained points per block in the cases (i)-(ii) statements.
BLOCK_POINTS = 96


class DeductionError(ValueError):
    """ Raised on rejected facts and invalid derivations. """


class AxiomTag(enum.Enum):
    SMALL_N = "small-n"
    ASSUMED = "assumed"


@dataclasses.dataclass(frozen=True)
class Provenance:
    """ Where a fact comes from: a replayed certificate or a tagged axiom. """
    certificate: verifier.Certificate|None = dataclasses.field(default=None, compare=False)
    tag: AxiomTag|None = None
    source: str|None = None

    def __post_init__(self):
        if (self.certificate is None) == (self.tag is None):
            raise DeductionError(
                "Provenance needs exactly one of a certificate or an axiom tag")

    def __str__(self) -> str:
        if self.certificate is not None:
            res = f"certificate seed={self.certificate.seed} p={self.certificate.prime}"
            if self.source:
                res = f"{res} ({os.path.basename(self.source)})"
            return res
        res = f"axiom: {self.tag.value}"
        if self.source:
            res = f"{res} ({self.source})"
        return res

    def to_dict(self) -> dict:
        if self.certificate is not None:
            return {
                "certificate": self.source or str(self.certificate.statement),
                "seed": self.certificate.seed,
                "prime": self.certificate.prime}
        return {"axiom": self.tag.value}


@dataclasses.dataclass(frozen=True)
class Fact:
    statement: Statement
    provenance: Provenance


def _sort_key(st: Statement) -> tuple:
    return (st.n, st.d, st.s, st.a, st.b)


def _is_secant(st: Statement) -> bool:
    return st.d == CUBIC and st.b == DEFAULT_BLOCK_WIDTH and not any(st.a)


def _principal_index(n: int, s: int) -> int|None:
    if s == geometry.s1(n):
        return 1
    if s == geometry.s2(n):
        return 2
    return None


class RuleId(enum.Enum):
    FACT = "fact"
    MONO_MINUS = "Mono-"
    MONO_PLUS = "Mono+"
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    P4 = "P4"


class Rule(metaclass=abc.ABCMeta):
    """ One implication: if every premise holds, so does the goal.

    `match` returns the premises (and the principal index i the instance
    uses, if any) when the goal has this rule's conclusion shape and lies
    in its validity domain, or None otherwise.
    """

    id: RuleId
    min_n: int = 1

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.id.value}, n>={self.min_n})"

    @abc.abstractmethod
    def match(self, goal: Statement) -> tuple[list[Statement], int|None]|None:
        raise NotImplementedError()


class SecantGrowthRule(Rule):
    """ T(n, s_i(n); 0, 0, 0) from T(n, t(n); s_i(n-24), 0, 0) and
    T(n-24, s_i(n-24); 0, 0, 0). """
    id = RuleId.P1
    min_n = 32

    def match(self, goal: Statement):
        if goal.n < self.min_n or not _is_secant(goal):
            return None
        i = _principal_index(goal.n, goal.s)
        if i is None:
            return None
        m = goal.n - 24
        return [
            Statement(goal.n, geometry.t(goal.n), geometry.s_i(m, i)),
            Statement(m, geometry.s_i(m, i)),
        ], i


class OneBlockRule(Rule):
    """ T(n, t(n); s_i(n-24), 0, 0) from T(n, 96; t(n-24), t(n-24), 0) and
    T(n-24, t(n-24); s_i(n-48), 0, 0). """
    id = RuleId.P2
    min_n = 56

    def match(self, goal: Statement):
        if goal.n < self.min_n or goal.d != CUBIC or goal.b != DEFAULT_BLOCK_WIDTH:
            return None
        if goal.s != geometry.t(goal.n) or goal.a2 or goal.a3:
            return None
        i = _principal_index(goal.n - 24, goal.a1)
        if i is None:
            return None
        m = goal.n - 24
        return [
            Statement(goal.n, BLOCK_POINTS, geometry.t(m), geometry.t(m), 0),
            Statement(m, geometry.t(m), geometry.s_i(m - 24, i)),
        ], i


class TwoBlockRule(Rule):
    """ T(n, 96; t(n-24), t(n-24), 0) from T(n, 0; 96, 96, 96) and
    T(n-24, 96; t(n-48), t(n-48), 0). """
    id = RuleId.P3
    min_n = 80

    def match(self, goal: Statement):
        if goal.n < self.min_n or goal.d != CUBIC or goal.b != DEFAULT_BLOCK_WIDTH:
            return None
        m = goal.n - 24
        tm = geometry.t(m)
        if goal.s != BLOCK_POINTS or goal.a != (tm, tm, 0):
            return None
        tmm = geometry.t(m - 24)
        return [
            Statement(goal.n, 0, BLOCK_POINTS, BLOCK_POINTS, BLOCK_POINTS),
            Statement(m, BLOCK_POINTS, tmm, tmm, 0),
        ], None


class ThreeBlockRule(Rule):
    """ T(n, 0; 96, 96, 96) for n > 71 from T(71, 0; 96, 96, 96). """
    id = RuleId.P4
    min_n = 72
    base_n = 71

    def match(self, goal: Statement):
        if goal.n < self.min_n or goal.d != CUBIC or goal.b != DEFAULT_BLOCK_WIDTH:
            return None
        if goal.s != 0 or goal.a != (BLOCK_POINTS,) * 3:
            return None
        return [Statement(self.base_n, 0, *(BLOCK_POINTS,) * 3)], None


class MonotoneRule(Rule):
    """ Fewer points than a true subabundant statement, or more points than
    a true superabundant one, keep the statement true. """

    def __init__(self, rule_id: RuleId, pick: Callable[[tuple[Statement, Statement], Statement], Statement|None]):
        self.id = rule_id
        self._pick = pick

    def match(self, goal: Statement):
        if not _is_secant(goal) or goal.s < 1:
            return None
        premise = self._pick(geometry.principal_statements(goal.n), goal)
        if premise is None:
            return None
        return [premise], None


RULES: list[Rule] = [
    SecantGrowthRule(),
    OneBlockRule(),
    TwoBlockRule(),
    ThreeBlockRule(),
    MonotoneRule(
        RuleId.MONO_MINUS,
        lambda bounds, goal: bounds[0] if goal.s < bounds[0].s else None),
    MonotoneRule(
        RuleId.MONO_PLUS,
        lambda bounds, goal: bounds[1] if goal.s > bounds[1].s else None),
]
RULES_BY_ID = {rule.id: rule for rule in RULES}


@dataclasses.dataclass(frozen=True)
class Derivation:
    """ Tree of rule applications whose leaves are facts. """
    statement: Statement
    rule: RuleId
    premises: tuple["Derivation", ...] = ()
    fact: Fact|None = None
    index: int|None = None

    def leaves(self) -> list[Fact]:
        if self.rule == RuleId.FACT:
            return [self.fact]
        return [leaf for child in self.premises for leaf in child.leaves()]

    def rules_used(self) -> list[RuleId]:
        res = [self.rule]
        for child in self.premises:
            res.extend(child.rules_used())
        return res

    def validate(self, facts: "FactBase|None"=None):
        """ Re-checks every rule instance, every leaf, and that a single
        principal index is used along the whole tree. """
        indices = set()

        def _walk(node: Derivation):
            if node.rule == RuleId.FACT:
                if node.premises or node.fact is None:
                    raise DeductionError(f"Leaf for {node.statement} is not a bare fact")
                if node.fact.statement != node.statement:
                    raise DeductionError(
                        f"Leaf for {node.statement} cites a fact about "
                        f"{node.fact.statement}")
                if facts is not None and facts.lookup(node.statement) is None:
                    raise DeductionError(f"{node.statement} is not in the fact base")
                return

            rule = RULES_BY_ID[node.rule]
            matched = rule.match(node.statement)
            if matched is None:
                raise DeductionError(
                    f"Rule {node.rule.value} does not apply to {node.statement}")
            premises, i = matched
            children = [child.statement for child in node.premises]
            if children != premises:
                raise DeductionError(
                    f"Rule {node.rule.value} at {node.statement} requires "
                    f"{[str(p) for p in premises]}, got {[str(c) for c in children]}")
            if i != node.index:
                raise DeductionError(
                    f"Rule {node.rule.value} at {node.statement} uses i={i}, "
                    f"node records i={node.index}")
            if i is not None:
                indices.add(i)
            for child in node.premises:
                _walk(child)

        _walk(self)
        if len(indices) > 1:
            raise DeductionError(
                f"Derivation of {self.statement} mixes principal indices {sorted(indices)}")

    def to_text(self, indent: int=0) -> str:
        pad = "  " * indent
        if self.rule == RuleId.FACT:
            label = str(self.fact.provenance)
        else:
            label = self.rule.value
            if self.index is not None:
                label = f"{label}, i={self.index}"
        lines = [f"{pad}{self.statement}  [{label}]"]
        lines.extend(child.to_text(indent + 1) for child in self.premises)
        return "\n".join(lines)

    def to_dict(self) -> dict:
        res = {"statement": str(self.statement), "rule": self.rule.value}
        if self.index is not None:
            res["i"] = self.index
        if self.fact is not None:
            res["provenance"] = self.fact.provenance.to_dict()
        if self.premises:
            res["premises"] = [child.to_dict() for child in self.premises]
        return res


@dataclasses.dataclass
class Conclusion:
    goal: Statement
    derivation: Derivation|None = None
    missing: list[Statement] = dataclasses.field(default_factory=list)

    @property
    def proven(self) -> bool:
        return self.derivation is not None

    def to_text(self) -> str:
        if self.proven:
            return f"{self.goal} is proven:\n{self.derivation.to_text(1)}"
        lines = [f"{self.goal} is not proven; missing facts:"]
        lines.extend(f"  {st}" for st in self.missing)
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "goal": str(self.goal),
            "proven": self.proven,
            "derivation": self.derivation.to_dict() if self.derivation else None,
            "missing": [str(st) for st in self.missing],
        }


class FactBase():
    """ Certified statements keyed by the full statement tuple. """

    def __init__(self, small_n_axiom: bool=False):
        self._facts: dict[Statement, Fact] = {}
        self.small_n_axiom = small_n_axiom

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({len(self)} facts, small_n_axiom={self.small_n_axiom})"

    def __len__(self) -> int:
        return len(self._facts)

    def __contains__(self, st: Statement) -> bool:
        return self.lookup(st) is not None

    def facts(self) -> list[Fact]:
        return [self._facts[st] for st in sorted(self._facts, key=_sort_key)]

    def lookup(self, st: Statement) -> Fact|None:
        fact = self._facts.get(st)
        if fact is not None:
            return fact
        if self.small_n_axiom and _is_secant(st) and st.n <= SMALL_N_AXIOM_MAX_N \
                and st.s >= 1 and not geometry.known_exception(st.n, CUBIC, st.s):
            return Fact(st, Provenance(tag=AxiomTag.SMALL_N))
        return None

    def add_fact(self, cert: verifier.Certificate, source: str|None=None,
                 replay: bool=True, threads: int=1) -> Fact:
        """ Records a certificate-backed fact after replaying it. """
        if cert.verdict != verifier.VerdictStatus.PROVEN_TRUE:
            raise DeductionError(
                f"Rejected certificate for {cert.statement}: verdict is "
                f"{cert.verdict.value}")
        if replay:
            try:
                verdict = verifier.replay(cert, threads=threads)
            except (verifier.CertificateError, verifier.ReplayMismatchError) as ex:
                raise DeductionError(
                    f"Rejected certificate for {cert.statement}: {ex}") from ex
            if not verdict.proven:
                raise DeductionError(
                    f"Rejected certificate for {cert.statement}: replay "
                    f"gives {verdict.status.value}")

        fact = Fact(cert.statement, Provenance(certificate=cert, source=source))
        self._facts[cert.statement] = fact
        LOG.debug(f"{self}.add_fact(): recorded {cert.statement}")
        return fact

    def add_axiom(self, st: Statement, tag: AxiomTag|str, source: str|None=None) -> Fact:
        try:
            tag = AxiomTag(tag)
        except ValueError as ex:
            raise DeductionError(
                f"Axiom tag '{tag}' is not whitelisted. Supported tags are: "
                f"{[t.value for t in AxiomTag]}") from ex
        if tag == AxiomTag.SMALL_N:
            if not _is_secant(st) or st.n > SMALL_N_AXIOM_MAX_N or \
                    geometry.known_exception(st.n, CUBIC, st.s):
                raise DeductionError(
                    f"The {tag.value} axiom only covers non-exceptional "
                    f"T(n, 3; s) with n <= {SMALL_N_AXIOM_MAX_N}, got {st}")

        fact = Fact(st, Provenance(tag=tag, source=source))
        self._facts[st] = fact
        if tag == AxiomTag.ASSUMED:
            LOG.warning(f"{self}.add_axiom(): {st} is ASSUMED, not certified")
        return fact

    def load_directory(self, path: str, replay: bool=True, threads: int=1) -> list[Fact]:
        """ Loads and replays every *.json certificate in `path`.

        Certificates with an unknown verdict are skipped; malformed ones
        and replay mismatches are errors.
        """
        if not os.path.isdir(path):
            raise DeductionError(f"Fact store '{path}' is not a directory")

        loaded = []
        for name in sorted(os.listdir(path)):
            if not name.endswith(".json"):
                continue
            filepath = os.path.join(path, name)
            with open(filepath, "r") as fin:
                cert = verifier.Certificate.from_json(fin.read())
            if cert.verdict != verifier.VerdictStatus.PROVEN_TRUE:
                LOG.warning(
                    f"{self}.load_directory(): skipping {filepath} with "
                    f"verdict {cert.verdict.value}")
                continue
            if replay:
                verifier.replay(cert, threads=threads)
            loaded.append(self.add_fact(cert, source=filepath, replay=False))

        LOG.info(f"{self}.load_directory(): loaded {len(loaded)} facts from {path}")
        return loaded

    def load_axioms(self, val: dict, source: str|None=None) -> list[Fact]:
        """ Loads {"axioms": [{"statement": "T(...)", "tag": ...}, ...]}. """
        if not isinstance(val, dict) or not isinstance(val.get("axioms"), list):
            raise DeductionError(
                f"Axiom file must be a mapping with an 'axioms' list, got {val!r}")
        loaded = []
        for entry in val["axioms"]:
            if not isinstance(entry, dict) or "statement" not in entry:
                raise DeductionError(f"Invalid axiom entry: {entry!r}")
            try:
                st = Statement.parse(str(entry["statement"]))
            except geometry.StatementError as ex:
                raise DeductionError(f"Invalid axiom statement: {ex}") from ex
            loaded.append(self.add_axiom(
                st, entry.get("tag", AxiomTag.ASSUMED.value), source=source))
        return loaded

    def load_axioms_yaml(self, path: str) -> list[Fact]:
        with open(path, "r") as fin:
            val = yaml.safe_load(fin)
        return self.load_axioms(val, source=path)


def prove(goal: Statement, facts: FactBase) -> Conclusion:
    """ Backward-chains from `goal` down to facts.

    A goal already in the fact base is a leaf. Otherwise the single rule
    matching its shape is applied; goals matched by no rule are reported
    as missing.
    """
    memo: dict[Statement, Derivation|None] = {}
    missing: set[Statement] = set()

    def _prove(st: Statement) -> Derivation|None:
        if st in memo:
            return memo[st]

        res = None
        fact = facts.lookup(st)
        if fact is not None:
            res = Derivation(st, RuleId.FACT, fact=fact)
        else:
            for rule in RULES:
                matched = rule.match(st)
                if matched is None:
                    continue
                premises, i = matched
                children = [_prove(p) for p in premises]
                if all(children):
                    res = Derivation(st, rule.id, tuple(children), index=i)
                break
            else:
                missing.add(st)

        memo[st] = res
        return res

    derivation = _prove(goal)
    return Conclusion(goal, derivation, sorted(missing, key=_sort_key))


def conclude(n: int, i: int, facts: FactBase) -> Conclusion:
    """ Derives T(n, 3; s_i(n)) for n >= 8. """
    if n < 8:
        raise DeductionError(
            f"conclude() requires n >= 8, got {n=}; use theorem_report() "
            "for smaller n")
    goal = Statement(n, geometry.s_i(n, i))
    res = prove(goal, facts)
    if res.proven:
        res.derivation.validate(facts)
    LOG.info(
        f"conclude({n}, {i}): {goal} "
        f"{'proven' if res.proven else f'missing {len(res.missing)} facts'}")
    return res


@dataclasses.dataclass
class TheoremRow:
    n: int
    subabundant: Conclusion
    superabundant: Conclusion
    exceptions: list[int] = dataclasses.field(default_factory=list)

    @property
    def proven(self) -> bool:
        return self.subabundant.proven and self.superabundant.proven

    def to_text(self) -> str:
        low = self.subabundant.goal
        high = self.superabundant.goal
        if self.proven:
            if low == high:
                res = f"n={self.n}: {low} holds; Mono-/Mono+ extend it to every s"
            else:
                res = (f"n={self.n}: {low} and {high} hold; Mono- covers s <= "
                       f"{low.s}, Mono+ covers s >= {high.s}")
            if self.exceptions:
                res = f"{res}; defective for s in {self.exceptions} (known exception)"
            else:
                res = f"{res}; nondefective for all s"
            return res
        missing = sorted(
            set(self.subabundant.missing) | set(self.superabundant.missing),
            key=_sort_key)
        return f"n={self.n}: not proven; missing {', '.join(str(st) for st in missing)}"


@dataclasses.dataclass
class TheoremReport:
    rows: list[TheoremRow]

    @property
    def proven(self) -> bool:
        return all(row.proven for row in self.rows)

    def to_text(self) -> str:
        return "\n".join(row.to_text() for row in self.rows)

    def to_dict(self) -> dict:
        return {
            "proven": self.proven,
            "rows": [
                {"n": row.n, "proven": row.proven, "exceptions": row.exceptions,
                 "subabundant": row.subabundant.to_dict(),
                 "superabundant": row.superabundant.to_dict()}
                for row in self.rows]}


def theorem_report(ns: Iterable[int]|int, facts: FactBase) -> TheoremReport:
    """ Concludes both principal statements for every requested n. Below
    n = 8 the principal statements must be facts themselves. """
    if isinstance(ns, int):
        ns = [ns]

    rows = []
    for n in ns:
        low, high = geometry.principal_statements(n)
        low_res, high_res = prove(low, facts), prove(high, facts)
        for res in (low_res, high_res):
            if res.proven:
                res.derivation.validate(facts)
        exceptions = [
            s for s in range(low.s, high.s + 1)
            if geometry.known_exception(n, CUBIC, s)]
        rows.append(TheoremRow(n, low_res, high_res, exceptions))
    return TheoremReport(rows)
