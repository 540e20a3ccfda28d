import pytest

from spikesoc.configdoc import parse, serialize
from spikesoc.errors import ResourceError
from spikesoc.netbuild import (
    NetworkSpec,
    Population,
    Projection,
    compile_network,
    spec_from_dict,
    validate_document,
)


def all_to_all_spec(n=4, r=2):
    return NetworkSpec(
        populations=[
            Population(name="pre", size=n, core=0, first_neuron=0),
            Population(name="post", size=n, core=0, first_neuron=n),
        ],
        projections=[Projection(pre="pre", post="post", rule="all_to_all", r=r)],
    )


def ring_spec(n=8, r=1):
    return NetworkSpec(
        populations=[
            Population(name="pre", size=n, core=0, first_neuron=0),
            Population(name="post", size=n, core=0, first_neuron=n),
        ],
        projections=[Projection(pre="pre", post="post", rule="ring", r=r)],
    )


class TestAllToAll:
    def test_single_shared_tag(self):
        doc = compile_network(all_to_all_spec(4, 2))
        core = doc.chips[0].cores[0]
        tags = {core.neurons[i].srams[0].tag for i in range(4)}
        assert tags == {0}
        total_cams = sum(len(core.neurons[4 + i].synapses) for i in range(4))
        assert total_cams == 8
        for i in range(4):
            assert all(s.cam == 0 for s in core.neurons[4 + i].synapses.values())

    def test_r_synapses_per_post(self):
        doc = compile_network(all_to_all_spec(16, 4))
        core = doc.chips[0].cores[0]
        for i in range(16):
            assert len(core.neurons[16 + i].synapses) == 4


class TestRing:
    def test_tag_interval_and_modular_cams(self):
        n, r = 8, 1
        doc = compile_network(ring_spec(n, r))
        core = doc.chips[0].cores[0]
        for i in range(n):
            assert core.neurons[i].srams[0].tag == i
        for i in range(n):
            cams = sorted(s.cam for s in core.neurons[n + i].synapses.values())
            want = sorted(((i + k) % n) for k in range(-r, r + 1))
            assert cams == want

    def test_five_tags_each_for_r2(self):
        doc = compile_network(ring_spec(16, 2))
        core = doc.chips[0].cores[0]
        for i in range(16):
            cams = {s.cam for s in core.neurons[16 + i].synapses.values()}
            assert len(cams) == 5


class TestResources:
    def test_too_many_cams_rejected(self):
        spec = all_to_all_spec(4, 65)
        with pytest.raises(ResourceError):
            compile_network(spec)

    def test_sram_slots_exhausted(self):
        pops = [Population(name="pre", size=1, first_neuron=0)] + [
            Population(name=f"post{i}", size=1, first_neuron=10 + i) for i in range(5)
        ]
        projs = [Projection(pre="pre", post=f"post{i}", rule="all_to_all", r=1) for i in range(5)]
        with pytest.raises(ResourceError):
            compile_network(NetworkSpec(populations=pops, projections=projs))

    def test_error_names_the_neuron(self):
        with pytest.raises(ResourceError, match="neuron 4"):
            compile_network(all_to_all_spec(4, 65))

    def test_chip_displacement_limit(self):
        spec = NetworkSpec(
            populations=[
                Population(name="a", size=1, chip=(0, 0)),
                Population(name="b", size=1, chip=(8, 0)),
            ],
            projections=[Projection(pre="a", post="b", rule="all_to_all", r=1)],
            grid=(9, 1),
        )
        with pytest.raises(ResourceError, match="displacement"):
            compile_network(spec)


class TestDeterminism:
    def test_compile_is_deterministic_and_idempotent(self):
        a = serialize(compile_network(all_to_all_spec(5, 3)))
        b = serialize(compile_network(all_to_all_spec(5, 3)))
        assert a == b

    def test_round_trips_through_json(self):
        doc = compile_network(ring_spec(6, 2))
        assert serialize(parse(serialize(doc))) == serialize(doc)


class TestValidate:
    def test_clean_compile_has_no_diagnostics(self):
        doc = compile_network(all_to_all_spec(4, 2))
        assert validate_document(doc) == []

    def test_hand_built_alias_flagged(self):
        doc = compile_network(all_to_all_spec(2, 1))
        core = doc.chips[0].cores[0]
        # Second, unrelated source-map entry reusing tag 0 by hand.
        doc.meta = {}
        assert any("aliasing" in d for d in validate_document(doc))

    def test_sram_to_missing_chip_flagged(self):
        doc = compile_network(all_to_all_spec(2, 1))
        core = doc.chips[0].cores[0]
        core.neurons[0].srams[0].dx = 3
        doc.meta = {}
        assert any("missing chip" in d for d in validate_document(doc))

    def test_spec_from_dict(self):
        spec = spec_from_dict(
            {
                "populations": [
                    {"name": "a", "size": 2},
                    {"name": "b", "size": 2, "first_neuron": 4},
                ],
                "projections": [{"pre": "a", "post": "b", "rule": "all_to_all", "r": 1}],
            }
        )
        doc = compile_network(spec)
        assert len(doc.chips[0].cores[0].neurons[4].synapses) == 1


class TestMuxSpill:
    # All-to-all shares one tag, so dense fan-in needs distinct tags via
    # explicit pairs: 80 presynaptic neurons x 2 synapses each on one post.
    def spill_spec(self, mux: bool) -> NetworkSpec:
        pairs = [(i, 0) for i in range(80) for _ in range(2)]
        return NetworkSpec(
            populations=[
                Population(name="pre", size=80, first_neuron=64),
                Population(
                    name="post", size=1, first_neuron=0,
                    latches={"DE_MUX": True} if mux else {},
                ),
            ],
            projections=[Projection(pre="pre", post="post", rule="pairs", pairs=pairs)],
        )

    def test_mux_mode_allows_256_synapses_per_soma(self):
        doc = compile_network(self.spill_spec(mux=True))
        core = doc.chips[0].cores[0]
        assert core.latches["DE_MUX"] is True
        group = [0, 1, 16, 17]
        counts = {
            idx: len(core.neurons[idx].synapses) if idx in core.neurons else 0 for idx in group
        }
        assert sum(counts.values()) == 160
        assert all(c <= 64 for c in counts.values())

    def test_without_mux_the_same_network_is_rejected(self):
        with pytest.raises(ResourceError, match="DE_MUX"):
            compile_network(self.spill_spec(mux=False))

    def test_mux_spill_delivers_through_engine(self):
        from spikesoc.engine import run_simulation
        from spikesoc.params import bias_for_current
        from spikesoc.routing import InterNeuronEvent, encode_word

        doc = compile_network(self.spill_spec(mux=True))
        doc.chips[0].cores[0].biases["SYAM_W0"] = bias_for_current(50e-12)
        # Tag 70 lives on a spilled group member, not the root itself.
        word = encode_word(InterNeuronEvent(tag=70, cores=1))
        report = run_simulation(doc, events=[(1000, word)], until_ns=1_000_000_000)
        assert report.counters["cam_matches"] == 2
        assert report.counters["syn_pulses"] == 2
