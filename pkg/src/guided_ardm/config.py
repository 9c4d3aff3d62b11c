"""Run configuration: one JSON document drives everything.

Every field has a default except the domain description and the output
directory (the output directory may also come from the command line). A
parsed config serializes back to an equivalent document: parse, serialize,
parse again gives the same configuration.

Validation errors name the offending field and, when the raw text is
available, the line it appears on.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

METHODS = ("ardm", "ardg", "bsdg", "fadg")
ORDER_KINDS = ("uniform", "nses", "nesn")
SCHEDULES = ("final_step_exact", "constant")

DEFAULT_NUM_PARTICLES = 10
DEFAULT_ESS_THRESHOLD = 0.7


class ConfigError(ValueError):
    """A config document failed validation; message names field and line."""


def _line_of(raw: str | None, key: str) -> int | None:
    if raw is None:
        return None
    needle = f'"{key}"'
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if needle in line:
            return lineno
    return None


def _fail(field_path: str, message: str, raw: str | None = None) -> ConfigError:
    leaf = field_path.split(".")[-1].split("[")[0]
    line = _line_of(raw, leaf)
    where = field_path if line is None else f"{field_path} (line {line})"
    return ConfigError(f"config field {where}: {message}")


def _expect(doc, field_path, allowed_keys, raw):
    if not isinstance(doc, dict):
        raise _fail(field_path, "must be an object", raw)
    unknown = set(doc) - set(allowed_keys)
    if unknown:
        raise _fail(
            f"{field_path}.{sorted(unknown)[0]}", "unknown field", raw
        )


@dataclass(frozen=True)
class SequenceDomainConfig:
    categories: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"kind": "sequence", "categories": list(self.categories)}


@dataclass(frozen=True)
class GraphDomainConfig:
    node_count_probs: tuple[tuple[int, float], ...]
    node_categories: int = 2
    edge_categories: int = 2

    def to_dict(self) -> dict:
        return {
            "kind": "graph",
            "node_count_probs": {str(n): p for n, p in self.node_count_probs},
            "node_categories": self.node_categories,
            "edge_categories": self.edge_categories,
        }


def _parse_domain(doc, raw):
    path = "domain"
    if not isinstance(doc, dict) or "kind" not in doc:
        raise _fail(path, "must be an object with a 'kind'", raw)
    kind = doc["kind"]
    if kind == "sequence":
        _expect(doc, path, {"kind", "categories"}, raw)
        cats = doc.get("categories")
        if (
            not isinstance(cats, list)
            or not cats
            or not all(isinstance(c, int) and c >= 1 for c in cats)
        ):
            raise _fail(
                f"{path}.categories", "must be a nonempty list of ints >= 1", raw
            )
        return SequenceDomainConfig(tuple(cats))
    if kind == "graph":
        _expect(
            doc,
            path,
            {"kind", "node_count_probs", "node_categories", "edge_categories"},
            raw,
        )
        probs = doc.get("node_count_probs")
        if not isinstance(probs, dict) or not probs:
            raise _fail(
                f"{path}.node_count_probs",
                "must be a nonempty object mapping node counts to probabilities",
                raw,
            )
        try:
            items = sorted((int(n), float(p)) for n, p in probs.items())
        except (TypeError, ValueError):
            raise _fail(
                f"{path}.node_count_probs", "keys must be ints, values numbers", raw
            ) from None
        if any(n < 1 for n, _ in items):
            raise _fail(f"{path}.node_count_probs", "node counts must be >= 1", raw)
        if any(p < 0 for _, p in items) or abs(sum(p for _, p in items) - 1) > 1e-9:
            raise _fail(
                f"{path}.node_count_probs",
                "probabilities must be nonnegative and sum to 1",
                raw,
            )
        nc = doc.get("node_categories", 2)
        ec = doc.get("edge_categories", 2)
        for name, v in (("node_categories", nc), ("edge_categories", ec)):
            if not isinstance(v, int) or v < 1:
                raise _fail(f"{path}.{name}", "must be an int >= 1", raw)
        return GraphDomainConfig(tuple(items), nc, ec)
    raise _fail(f"{path}.kind", f"must be 'sequence' or 'graph', got {kind!r}", raw)


@dataclass(frozen=True)
class TableSource:
    path: str | None = None
    categories: tuple[int, ...] | None = None
    probs: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        out: dict = {"kind": "table"}
        if self.path is not None:
            out["path"] = self.path
        if self.categories is not None:
            out["categories"] = list(self.categories)
            out["probs"] = list(self.probs)
        return out


@dataclass(frozen=True)
class FitSource:
    path: str
    smoothing: float = 1.0

    def to_dict(self) -> dict:
        return {"kind": "fit", "path": self.path, "smoothing": self.smoothing}


@dataclass(frozen=True)
class ValiditySource:
    num_samples: int = 2000
    smoothing: float = 0.0

    def to_dict(self) -> dict:
        return {
            "kind": "validity_rejection",
            "num_samples": self.num_samples,
            "smoothing": self.smoothing,
        }


def _parse_source(doc, raw):
    path = "data_source"
    if doc is None:
        return ValiditySource()
    if not isinstance(doc, dict) or "kind" not in doc:
        raise _fail(path, "must be an object with a 'kind'", raw)
    kind = doc["kind"]
    if kind == "table":
        _expect(doc, path, {"kind", "path", "categories", "probs"}, raw)
        if "path" in doc:
            if not isinstance(doc["path"], str):
                raise _fail(f"{path}.path", "must be a string", raw)
            if "categories" in doc or "probs" in doc:
                raise _fail(path, "give either path or an inline table", raw)
            return TableSource(path=doc["path"])
        if "categories" not in doc or "probs" not in doc:
            raise _fail(path, "inline table needs categories and probs", raw)
        return TableSource(
            categories=tuple(doc["categories"]),
            probs=tuple(float(p) for p in doc["probs"]),
        )
    if kind == "fit":
        _expect(doc, path, {"kind", "path", "smoothing"}, raw)
        if not isinstance(doc.get("path"), str):
            raise _fail(f"{path}.path", "must be a string", raw)
        smoothing = doc.get("smoothing", 1.0)
        if not isinstance(smoothing, (int, float)) or smoothing < 0:
            raise _fail(f"{path}.smoothing", "must be a nonnegative number", raw)
        return FitSource(doc["path"], float(smoothing))
    if kind == "validity_rejection":
        _expect(doc, path, {"kind", "num_samples", "smoothing"}, raw)
        num = doc.get("num_samples", 2000)
        smoothing = doc.get("smoothing", 0.0)
        if not isinstance(num, int) or num < 1:
            raise _fail(f"{path}.num_samples", "must be a positive int", raw)
        if not isinstance(smoothing, (int, float)) or smoothing < 0:
            raise _fail(f"{path}.smoothing", "must be a nonnegative number", raw)
        return ValiditySource(num, float(smoothing))
    raise _fail(
        f"{path}.kind",
        f"must be 'table', 'fit', or 'validity_rejection', got {kind!r}",
        raw,
    )


@dataclass(frozen=True)
class PerturbationConfig:
    temperature: float = 1.0
    uniform_mix: float = 0.0

    def to_dict(self) -> dict:
        return {"temperature": self.temperature, "uniform_mix": self.uniform_mix}


def _parse_perturbation(doc, raw):
    path = "perturbation"
    if doc is None:
        return PerturbationConfig()
    _expect(doc, path, {"temperature", "uniform_mix"}, raw)
    t = doc.get("temperature", 1.0)
    m = doc.get("uniform_mix", 0.0)
    if not isinstance(t, (int, float)) or t <= 0:
        raise _fail(f"{path}.temperature", "must be a positive number", raw)
    if not isinstance(m, (int, float)) or not 0 <= m <= 1:
        raise _fail(f"{path}.uniform_mix", "must lie in [0, 1]", raw)
    return PerturbationConfig(float(t), float(m))


@dataclass(frozen=True)
class DiscriminatorConfig:
    kind: str = "optimal"
    epsilon: float = 0.0
    schedule: str = "final_step_exact"
    logit: float = 0.0

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "corrupt":
            out["epsilon"] = self.epsilon
            out["schedule"] = self.schedule
        if self.kind == "constant":
            out["logit"] = self.logit
        return out


def _parse_discriminator(doc, raw):
    path = "discriminator"
    if doc is None:
        return DiscriminatorConfig()
    if not isinstance(doc, dict) or "kind" not in doc:
        raise _fail(path, "must be an object with a 'kind'", raw)
    kind = doc["kind"]
    if kind == "optimal":
        _expect(doc, path, {"kind"}, raw)
        return DiscriminatorConfig("optimal")
    if kind == "corrupt":
        _expect(doc, path, {"kind", "epsilon", "schedule"}, raw)
        eps = doc.get("epsilon", 0.0)
        schedule = doc.get("schedule", "final_step_exact")
        if not isinstance(eps, (int, float)) or not 0 <= eps <= 1:
            raise _fail(f"{path}.epsilon", "must lie in [0, 1]", raw)
        if schedule not in SCHEDULES:
            raise _fail(
                f"{path}.schedule", f"must be one of {list(SCHEDULES)}", raw
            )
        return DiscriminatorConfig("corrupt", float(eps), schedule)
    if kind == "constant":
        _expect(doc, path, {"kind", "logit"}, raw)
        logit = doc.get("logit", 0.0)
        if not isinstance(logit, (int, float)):
            raise _fail(f"{path}.logit", "must be a number", raw)
        return DiscriminatorConfig("constant", logit=float(logit))
    raise _fail(
        f"{path}.kind",
        f"must be 'optimal', 'corrupt', or 'constant', got {kind!r}",
        raw,
    )


@dataclass(frozen=True)
class RunConfig:
    domain: SequenceDomainConfig | GraphDomainConfig
    data_source: TableSource | FitSource | ValiditySource = field(
        default_factory=ValiditySource
    )
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    methods: tuple[str, ...] = METHODS
    order_kinds: tuple[str, ...] = ("uniform",)
    num_samples: int = 1000
    num_particles: int = DEFAULT_NUM_PARTICLES
    ess_threshold: float = DEFAULT_ESS_THRESHOLD
    seed: int = 0
    threads: int | None = None
    output_dir: str | None = None

    def to_dict(self) -> dict:
        out = {
            "domain": self.domain.to_dict(),
            "data_source": self.data_source.to_dict(),
            "perturbation": self.perturbation.to_dict(),
            "discriminator": self.discriminator.to_dict(),
            "methods": list(self.methods),
            "order_kinds": list(self.order_kinds),
            "num_samples": self.num_samples,
            "num_particles": self.num_particles,
            "ess_threshold": self.ess_threshold,
            "seed": self.seed,
        }
        if self.threads is not None:
            out["threads"] = self.threads
        if self.output_dir is not None:
            out["output_dir"] = self.output_dir
        return out

    def resolved_threads(self) -> int:
        if self.threads is not None:
            return self.threads
        env = os.environ.get("GUIDED_ARDM_THREADS", "").strip()
        if env:
            try:
                n = int(env)
            except ValueError:
                raise ConfigError(
                    f"GUIDED_ARDM_THREADS must be an int, got {env!r}"
                ) from None
            if n < 1:
                raise ConfigError("GUIDED_ARDM_THREADS must be positive")
            return n
        return 1


_TOP_KEYS = {
    "domain",
    "data_source",
    "perturbation",
    "discriminator",
    "methods",
    "order_kinds",
    "num_samples",
    "num_particles",
    "ess_threshold",
    "seed",
    "threads",
    "output_dir",
}


def config_from_dict(doc: dict, raw: str | None = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise _fail(sorted(unknown)[0], "unknown field", raw)
    if "domain" not in doc:
        raise ConfigError("config field domain: required")
    domain = _parse_domain(doc["domain"], raw)
    source = _parse_source(doc.get("data_source"), raw)
    perturbation = _parse_perturbation(doc.get("perturbation"), raw)
    disc = _parse_discriminator(doc.get("discriminator"), raw)

    methods = doc.get("methods", list(METHODS))
    if not isinstance(methods, list) or not methods:
        raise _fail("methods", "must be a nonempty list", raw)
    for k, m in enumerate(methods):
        if m not in METHODS:
            raise _fail(f"methods[{k}]", f"must be one of {list(METHODS)}", raw)
    if len(set(methods)) != len(methods):
        raise _fail("methods", "must not repeat", raw)

    kinds = doc.get("order_kinds", ["uniform"])
    if not isinstance(kinds, list) or not kinds:
        raise _fail("order_kinds", "must be a nonempty list", raw)
    for k, o in enumerate(kinds):
        if o not in ORDER_KINDS:
            raise _fail(
                f"order_kinds[{k}]", f"must be one of {list(ORDER_KINDS)}", raw
            )
    if len(set(kinds)) != len(kinds):
        raise _fail("order_kinds", "must not repeat", raw)
    if isinstance(domain, SequenceDomainConfig) and set(kinds) != {"uniform"}:
        raise _fail(
            "order_kinds", "sequence domains support only 'uniform'", raw
        )

    def _int_field(name, default, minimum):
        v = doc.get(name, default)
        if not isinstance(v, int) or v < minimum:
            raise _fail(name, f"must be an int >= {minimum}", raw)
        return v

    num_samples = _int_field("num_samples", 1000, 0)
    num_particles = _int_field("num_particles", DEFAULT_NUM_PARTICLES, 1)
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise _fail("seed", "must be a nonnegative int", raw)
    ess_threshold = doc.get("ess_threshold", DEFAULT_ESS_THRESHOLD)
    if not isinstance(ess_threshold, (int, float)) or not 0 <= ess_threshold <= 1:
        raise _fail("ess_threshold", "must lie in [0, 1]", raw)
    threads = doc.get("threads")
    if threads is not None and (not isinstance(threads, int) or threads < 1):
        raise _fail("threads", "must be a positive int", raw)
    output_dir = doc.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise _fail("output_dir", "must be a string", raw)

    if isinstance(domain, SequenceDomainConfig) and isinstance(
        source, ValiditySource
    ):
        raise _fail(
            "data_source",
            "sequence domains have no validity grammar; give a table or fit source",
            raw,
        )

    return RunConfig(
        domain=domain,
        data_source=source,
        perturbation=perturbation,
        discriminator=disc,
        methods=tuple(methods),
        order_kinds=tuple(kinds),
        num_samples=num_samples,
        num_particles=num_particles,
        ess_threshold=float(ess_threshold),
        seed=seed,
        threads=threads,
        output_dir=output_dir,
    )


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    return config_from_dict(doc, raw)
