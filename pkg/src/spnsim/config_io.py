"""Network spec files: a small TOML schema, read and written deterministically.

Buffers, activities and processors are 1-based in files and 0-based in code.
The schema (version key mandatory):

    spec_version = 1
    synchronized = false
    processors = 2
    partition = [[1, 4], [2, 3]]        # optional; default: one component

    [[buffers]]                          # one table per buffer, order = index
    name = "b1"                          # optional

    [[arrivals]]                         # omitted buffers get no arrivals
    buffer = 1
    kind = "poisson"                     # poisson | slotted
    rate = 1.0

    [[services]]                         # required for every buffer
    buffer = 1
    kind = "deterministic"               # deterministic|exponential|uniform|discrete
    mean = 0.1                           # or low/high, or values/probs

    [[activities]]
    buffer = 1
    processors = [1]
    beta = 1.0

    [routing]                            # dense matrix or sparse triplets
    dense = [[0.0, 1.0], [0.0, 0.0]]
    # sparse = [[1, 2, 1.0]]

A coupling-matrix file holds a single `coupling` key with a dense matrix.
"""

from __future__ import annotations

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .network import (
    NO_ARRIVALS,
    Activity,
    ArrivalModel,
    NetworkSpec,
    ServiceModel,
    deterministic_service,
    discrete_service,
    exponential_service,
    uniform_service,
)

SPEC_VERSION = 1


class ConfigError(ValueError):
    pass


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def _service_from_table(tab: dict) -> ServiceModel:
    kind = tab.get("kind")
    if kind == "deterministic":
        return deterministic_service(float(tab["mean"]))
    if kind == "exponential":
        return exponential_service(float(tab["mean"]))
    if kind == "uniform":
        return uniform_service(float(tab["low"]), float(tab["high"]))
    if kind == "discrete":
        return discrete_service(tab["values"], tab["probs"])
    raise ConfigError(f"unknown service kind {kind!r}")


def _service_to_table(svc: ServiceModel, buffer: int) -> dict:
    tab = {"buffer": buffer + 1, "kind": svc.kind}
    if svc.kind in ("deterministic", "exponential"):
        tab["mean"] = float(svc.mean)
    elif svc.kind == "uniform":
        tab["low"] = float(svc.low)
        tab["high"] = float(svc.high)
    else:
        tab["values"] = [float(v) for v in svc.values]
        tab["probs"] = [float(p) for p in svc.probs]
    return tab


def network_from_dict(data: dict) -> NetworkSpec:
    if data.get("spec_version") != SPEC_VERSION:
        raise ConfigError(f"spec_version must be {SPEC_VERSION}")
    buffers = data.get("buffers")
    if not isinstance(buffers, list) or not buffers:
        raise ConfigError("at least one [[buffers]] entry is required")
    num = len(buffers)
    names = tuple(str(b.get("name", f"b{i + 1}")) for i, b in enumerate(buffers))

    def buffer_index(tab: dict) -> int:
        idx = tab.get("buffer")
        if not isinstance(idx, int) or not 1 <= idx <= num:
            raise ConfigError(f"buffer index {idx!r} out of range 1..{num}")
        return idx - 1

    arrivals: list[ArrivalModel] = [NO_ARRIVALS] * num
    for tab in data.get("arrivals", []):
        i = buffer_index(tab)
        kind = tab.get("kind")
        if kind not in ("poisson", "slotted", "none"):
            raise ConfigError(f"unknown arrival kind {kind!r}")
        rate = float(tab.get("rate", 0.0)) if kind != "none" else 0.0
        arrivals[i] = ArrivalModel(kind, rate)

    services: list[ServiceModel | None] = [None] * num
    for tab in data.get("services", []):
        services[buffer_index(tab)] = _service_from_table(tab)
    missing = [i + 1 for i, s in enumerate(services) if s is None]
    if missing:
        raise ConfigError(f"buffers {missing} lack a [[services]] entry")

    acts = []
    for tab in data.get("activities", []):
        procs = tab.get("processors")
        if not isinstance(procs, list) or not procs:
            raise ConfigError("every activity needs a nonempty processors list")
        acts.append(Activity(
            buffer_index(tab),
            frozenset(int(k) - 1 for k in procs),
            float(tab.get("beta", 1.0)),
        ))
    if not acts:
        raise ConfigError("at least one [[activities]] entry is required")

    processors = data.get("processors")
    if not isinstance(processors, int) or processors < 1:
        raise ConfigError("processors must be a positive integer count")

    routing = np.zeros((num, num))
    rt = data.get("routing", {})
    if "dense" in rt:
        dense = np.asarray(rt["dense"], dtype=float)
        if dense.shape != (num, num):
            raise ConfigError(f"dense routing must be {num}x{num}")
        routing = dense
    elif "sparse" in rt:
        for trip in rt["sparse"]:
            if len(trip) != 3:
                raise ConfigError("sparse routing entries are [from, to, prob]")
            routing[int(trip[0]) - 1, int(trip[1]) - 1] = float(trip[2])

    partition = None
    if "partition" in data:
        partition = tuple(
            tuple(int(i) - 1 for i in comp) for comp in data["partition"]
        )
    return NetworkSpec(
        arrivals=tuple(arrivals),
        services=tuple(services),
        activities=tuple(acts),
        num_processors=processors,
        routing=routing,
        partition=partition,
        synchronized=bool(data.get("synchronized", False)),
        buffer_names=names,
    )


def load_network(path) -> NetworkSpec:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return network_from_dict(data)


def dump_network(spec: NetworkSpec, path, header: str = "") -> None:
    """Write the spec in schema order; output is byte-deterministic."""
    lines: list[str] = []
    if header:
        lines += [f"# {line}" if line else "#" for line in header.splitlines()]
        lines.append("")
    lines.append(f"spec_version = {SPEC_VERSION}")
    lines.append(f"synchronized = {_toml_value(spec.synchronized)}")
    lines.append(f"processors = {spec.num_processors}")
    if spec.partition is not None:
        comps = [[i + 1 for i in comp] for comp in spec.partition]
        lines.append(f"partition = {_toml_value(comps)}")
    names = spec.buffer_names or tuple(f"b{i + 1}" for i in range(spec.num_buffers))
    for name in names:
        lines += ["", "[[buffers]]", f"name = {_toml_value(name)}"]
    for i, arr in enumerate(spec.arrivals):
        if arr.kind == "none":
            continue
        lines += ["", "[[arrivals]]", f"buffer = {i + 1}",
                  f'kind = "{arr.kind}"', f"rate = {_toml_value(float(arr.rate))}"]
    for i, svc in enumerate(spec.services):
        lines += ["", "[[services]]"]
        for k, v in _service_to_table(svc, i).items():
            lines.append(f"{k} = {_toml_value(v)}")
    for act in spec.activities:
        lines += ["", "[[activities]]", f"buffer = {act.buffer + 1}",
                  f"processors = {_toml_value(sorted(k + 1 for k in act.processors))}",
                  f"beta = {_toml_value(float(act.rate))}"]
    dense = [[float(x) for x in row] for row in spec.routing]
    lines += ["", "[routing]", f"dense = {_toml_value(dense)}"]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_coupling(path) -> np.ndarray:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if "coupling" not in data:
        raise ConfigError("coupling file needs a `coupling` matrix")
    return np.asarray(data["coupling"], dtype=float)


def dump_coupling(coupling: np.ndarray, path) -> None:
    rows = [[float(x) for x in row] for row in np.asarray(coupling)]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"coupling = {_toml_value(rows)}\n")
