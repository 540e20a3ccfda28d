"""Network description compiled to chip configuration.

Populations claim ranges of physical neurons; projections allocate tags in
the destination core's namespace (lowest free tag first) and write the
source-mapping slots of the presynaptic neurons and the CAM tags of the
postsynaptic synapses.  Resources are hard limits: 64 synapses per neuron
(256 with four-neuron multiplexing), four source slots per neuron, 2048
tags per core, displacements within +/-7 chips.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .configdoc import (
    ChipDoc,
    ConfigDocument,
    EngineDoc,
    SramDoc,
    SynapseDoc,
    nominal_core_biases,
)
from .errors import ConfigError, ResourceError

TAGS_PER_CORE = 2048
MAX_SRAMS = 4
BASE_SYNAPSES = 64
MUX_SYNAPSES = 256


@dataclass
class Population:
    name: str
    size: int
    chip: tuple[int, int] = (0, 0)
    core: int = 0
    first_neuron: int = 0
    latches: dict[str, bool] = field(default_factory=dict)

    def neuron(self, i: int) -> int:
        return self.first_neuron + i


@dataclass
class Projection:
    pre: str
    post: str
    rule: str  # "all_to_all" | "ring" | "pairs"
    r: int = 1
    pairs: list[tuple[int, int]] = field(default_factory=list)
    weight: tuple[bool, bool, bool, bool] = (True, False, False, False)
    dendrite: str = "AMPA"
    precise_delay: bool = False
    mismatched_delay: bool = False
    stp: bool = False


@dataclass
class NetworkSpec:
    populations: list[Population] = field(default_factory=list)
    projections: list[Projection] = field(default_factory=list)
    grid: tuple[int, int] = (1, 1)

    def population(self, name: str) -> Population:
        for p in self.populations:
            if p.name == name:
                return p
        raise ConfigError(f"unknown population {name!r}")


def spec_from_dict(data: dict) -> NetworkSpec:
    pops = [
        Population(
            name=p["name"],
            size=int(p["size"]),
            chip=tuple(p.get("chip", (0, 0))),
            core=int(p.get("core", 0)),
            first_neuron=int(p.get("first_neuron", 0)),
            latches={str(k): bool(v) for k, v in p.get("latches", {}).items()},
        )
        for p in data.get("populations", [])
    ]
    projs = [
        Projection(
            pre=j["pre"],
            post=j["post"],
            rule=j.get("rule", "all_to_all"),
            r=int(j.get("r", 1)),
            pairs=[tuple(x) for x in j.get("pairs", [])],
            weight=tuple(bool(b) for b in j.get("weight", (True, False, False, False))),
            dendrite=j.get("dendrite", "AMPA"),
            precise_delay=bool(j.get("precise_delay", False)),
            mismatched_delay=bool(j.get("mismatched_delay", False)),
            stp=bool(j.get("stp", False)),
        )
        for j in data.get("projections", [])
    ]
    return NetworkSpec(populations=pops, projections=projs, grid=tuple(data.get("grid", (1, 1))))


def load_spec(path: str | Path) -> NetworkSpec:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid network spec JSON: {exc}") from exc
    return spec_from_dict(data)


class _CoreAlloc:
    """Per-core allocation state during compilation."""

    def __init__(self):
        self.next_tag = 0
        self.next_synapse: dict[int, int] = {}
        self.next_sram: dict[int, int] = {}
        self.tag_owner: dict[int, str] = {}

    def alloc_tags(self, count: int, owner: str) -> int:
        first = self.next_tag
        if first + count > TAGS_PER_CORE:
            raise ResourceError(f"{owner}: core tag namespace exhausted ({first + count} > {TAGS_PER_CORE})")
        self.next_tag += count
        for t in range(first, first + count):
            self.tag_owner[t] = owner
        return first


def compile_network(spec: NetworkSpec) -> ConfigDocument:
    """Deterministic compilation; identical specs yield identical documents."""
    chips: dict[tuple[int, int], ChipDoc] = {}
    for pop in spec.populations:
        if pop.chip not in chips:
            chips[pop.chip] = ChipDoc(x=pop.chip[0], y=pop.chip[1])
            for core in chips[pop.chip].cores:
                core.biases = dict(nominal_core_biases())
    doc = ConfigDocument(
        chips=[chips[c] for c in sorted(chips)],
        engine=EngineDoc(grid=spec.grid),
    )
    allocs: dict[tuple[tuple[int, int], int], _CoreAlloc] = {}

    for pop in spec.populations:
        if not 0 <= pop.core <= 3:
            raise ConfigError(f"population {pop.name!r}: core {pop.core} out of range")
        core = chips[pop.chip].cores[pop.core]
        mux = core.latch("DE_MUX") or any(
            p.latches.get("DE_MUX") for p in spec.populations if p.chip == pop.chip and p.core == pop.core
        )
        limit = 256
        if pop.first_neuron + pop.size > limit:
            raise ResourceError(f"population {pop.name!r}: neurons {pop.first_neuron}..{pop.first_neuron + pop.size - 1} exceed the core")
        for i in range(pop.size):
            ndoc = core.neuron(pop.neuron(i))
            for k, v in pop.latches.items():
                if k == "DE_MUX":
                    core.latches["DE_MUX"] = v
                else:
                    ndoc.latches[k] = v

    for proj_idx, proj in enumerate(spec.projections):
        pre = spec.population(proj.pre)
        post = spec.population(proj.post)
        owner = f"projection[{proj_idx}] {proj.pre}->{proj.post}"
        post_core = chips[post.chip].cores[post.core]
        alloc = allocs.setdefault((post.chip, post.core), _CoreAlloc())
        dx = post.chip[0] - pre.chip[0]
        dy = post.chip[1] - pre.chip[1]
        if abs(dx) > 7 or abs(dy) > 7:
            raise ResourceError(f"{owner}: chip displacement ({dx}, {dy}) exceeds +/-7")
        cores_mask = 1 << post.core

        def take_sram(pre_idx: int, tag: int) -> None:
            pre_core = chips[pre.chip].cores[pre.core]
            ndoc = pre_core.neuron(pre_idx)
            slot = len(ndoc.srams)
            if slot >= MAX_SRAMS:
                raise ResourceError(
                    f"{owner}: neuron {pre_idx} on chip {pre.chip} core {pre.core} has no free source slot (limit {MAX_SRAMS})"
                )
            ndoc.srams.append(SramDoc(tag=tag, dx=dx, dy=dy, cores=cores_mask))

        def take_synapse(post_idx: int, tag: int) -> None:
            ndoc = post_core.neuron(post_idx)
            mux_on = post_core.latch("DE_MUX")
            limit = MUX_SYNAPSES if mux_on else BASE_SYNAPSES
            used = len(ndoc.synapses)
            if not mux_on and used >= BASE_SYNAPSES:
                raise ResourceError(
                    f"{owner}: neuron {post_idx} on chip {post.chip} core {post.core} needs more than {BASE_SYNAPSES} synapses (enable DE_MUX for 256)"
                )
            if mux_on and used >= BASE_SYNAPSES:
                # Spill onto the other members of the four-neuron group.
                for member in _mux_members(post_idx):
                    mdoc = post_core.neuron(member)
                    if len(mdoc.synapses) < BASE_SYNAPSES:
                        ndoc = mdoc
                        used = len(mdoc.synapses)
                        break
                else:
                    raise ResourceError(f"{owner}: mux group of neuron {post_idx} exhausted ({MUX_SYNAPSES})")
            slot = _next_free_synapse(ndoc)
            ndoc.synapses[slot] = SynapseDoc(
                cam=tag,
                weight=proj.weight,
                precise_delay=proj.precise_delay,
                mismatched_delay=proj.mismatched_delay,
                stp=proj.stp,
                dendrite=proj.dendrite,
            )

        if proj.rule == "all_to_all":
            tag = alloc.alloc_tags(1, owner)
            for i in range(pre.size):
                take_sram(pre.neuron(i), tag)
            for i in range(post.size):
                for _ in range(proj.r):
                    take_synapse(post.neuron(i), tag)
        elif proj.rule == "ring":
            if pre.size != post.size:
                raise ConfigError(f"{owner}: ring rule requires equal population sizes")
            n = pre.size
            first = alloc.alloc_tags(n, owner)
            for i in range(n):
                take_sram(pre.neuron(i), first + i)
            for i in range(n):
                for k in range(-proj.r, proj.r + 1):
                    take_synapse(post.neuron(i), first + ((i + k) % n))
        elif proj.rule == "pairs":
            tags: dict[int, int] = {}
            for pre_i, _post_i in proj.pairs:
                if pre_i not in tags:
                    tags[pre_i] = alloc.alloc_tags(1, owner)
                    take_sram(pre.neuron(pre_i), tags[pre_i])
            for pre_i, post_i in proj.pairs:
                take_synapse(post.neuron(post_i), tags[pre_i])
        else:
            raise ConfigError(f"{owner}: unknown rule {proj.rule!r}")

    doc.meta["tag_owners"] = {
        f"{chip[0]}_{chip[1]}/core{core}": dict(sorted(
            (str(tag), who) for tag, who in alloc.tag_owner.items()
        ))
        for (chip, core), alloc in sorted(allocs.items())
    }
    doc.validate()
    return doc


def _next_free_synapse(ndoc) -> int:
    slot = 0
    while slot in ndoc.synapses:
        slot += 1
    return slot


def _mux_members(idx: int) -> list[int]:
    row, col = divmod(idx, 16)
    base_row, base_col = row - row % 2, col - col % 2
    return [base_row * 16 + base_col, base_row * 16 + base_col + 1,
            (base_row + 1) * 16 + base_col, (base_row + 1) * 16 + base_col + 1]


# ---------------------------------------------------------------------------
# Validation diagnostics
# ---------------------------------------------------------------------------


def validate_document(doc: ConfigDocument) -> list[str]:
    """Range and consistency diagnostics; empty list means clean."""
    diags: list[str] = []
    try:
        doc.validate()
    except ConfigError as exc:
        diags.append(f"error: {exc}")
        return diags
    coords = {(c.x, c.y) for c in doc.chips}
    for ci, chip in enumerate(doc.chips):
        for k, core in enumerate(chip.cores):
            tag_sources: dict[int, list[str]] = {}
            for idx in sorted(core.neurons):
                ndoc = core.neurons[idx]
                for slot, sram in enumerate(ndoc.srams):
                    if sram.cores == 0:
                        continue
                    target = (chip.x + sram.dx, chip.y + sram.dy)
                    if target not in coords:
                        diags.append(
                            f"warning: chips[{ci}].cores[{k}].neurons[{idx}].srams[{slot}] "
                            f"targets missing chip {target}"
                        )
            cam_tags: dict[int, int] = {}
            for idx in sorted(core.neurons):
                for j, syn in sorted(core.neurons[idx].synapses.items()):
                    cam_tags[syn.cam] = cam_tags.get(syn.cam, 0) + 1
            # Tag aliasing: a tag fed from several sources inside this core's
            # broadcast domain is indistinguishable downstream.  With compile
            # metadata, sharing inside one projection is deliberate; without
            # it, any multi-source tag is reported.
            for (sx, sy) in coords:
                src_chip = doc.chip_at(sx, sy)
                for src_core in src_chip.cores:
                    for idx in sorted(src_core.neurons):
                        for sram in src_core.neurons[idx].srams:
                            if sram.cores & (1 << k) and (sx + sram.dx, sy + sram.dy) == (chip.x, chip.y):
                                tag_sources.setdefault(sram.tag, []).append(
                                    f"chip({sx},{sy})n{idx}"
                                )
            owners = doc.meta.get("tag_owners", {}).get(f"{chip.x}_{chip.y}/core{k}")
            for tag, sources in sorted(tag_sources.items()):
                if len(set(sources)) <= 1 or tag not in cam_tags:
                    continue
                if owners is not None and str(tag) in owners:
                    continue  # allocated to exactly one projection
                diags.append(
                    f"aliasing: chips[{ci}].cores[{k}] tag {tag} driven by "
                    f"{len(set(sources))} sources; deliveries are indistinguishable"
                )
    return diags
