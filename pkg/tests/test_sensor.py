import pytest

from spikesoc.errors import ConfigError
from spikesoc.routing import SensorEvent
from spikesoc.sensor import (
    MappingEntry,
    PipelineCounters,
    SensorPipelineConfig,
    identity_mapping,
    process_sensor_event,
    sensor_source_map,
)


def ev(x, y, pol=1):
    return SensorEvent(pol=pol, pixel_y=y, pixel_x=x)


def full_cfg(**kwargs):
    defaults = dict(
        cut_origin=(0, 0),
        cut_size=(64, 64),
        mapping=identity_mapping(64, 64, cores=1),
    )
    defaults.update(kwargs)
    return SensorPipelineConfig(**defaults)


class TestStages:
    def test_pixel_filter_drops_and_counts(self):
        cfg = full_cfg(pixel_filter=((5, 6),))
        counters = PipelineCounters()
        word, dup = process_sensor_event(ev(5, 6), cfg, counters)
        assert word is None and dup is None
        assert counters.filtered == 1

    def test_pooling_floor_division(self):
        cfg = full_cfg(pool_x=4, pool_y=4)
        word, _ = process_sensor_event(ev(345, 12), cfg)
        # 345 // 4 = 86 exceeds the 64-wide patch -> dropped at cutting.
        assert word is None
        word, _ = process_sensor_event(ev(100, 12), cfg)
        assert word is not None
        assert word.tag == (12 // 4) * 64 + (100 // 4)

    def test_pool_identity_for_factor_one(self):
        cfg = full_cfg()
        word, _ = process_sensor_event(ev(20, 30), cfg)
        assert word.tag == 30 * 64 + 20

    def test_cutting_rebases_to_origin(self):
        cfg = full_cfg(cut_origin=(10, 10))
        word, _ = process_sensor_event(ev(12, 17), cfg)
        assert word.tag == 7 * 64 + 2

    def test_cutting_drops_outside_patch(self):
        cfg = full_cfg(cut_origin=(10, 10))
        counters = PipelineCounters()
        word, _ = process_sensor_event(ev(12, 80), cfg, counters)
        assert word is None
        assert counters.cut_dropped == 1

    def test_polarity_filter(self):
        cfg = full_cfg(polarity_mode="on_only")
        counters = PipelineCounters()
        assert process_sensor_event(ev(1, 1, pol=0), cfg, counters)[0] is None
        assert counters.polarity_dropped == 1
        assert process_sensor_event(ev(1, 1, pol=1), cfg, counters)[0] is not None

    def test_duplication_emits_neighbor_copy(self):
        cfg = full_cfg(duplicate_to=(1, 0))
        counters = PipelineCounters()
        word, dup = process_sensor_event(ev(3, 4), cfg, counters)
        assert word is not None
        assert dup is not None
        assert (dup.pixel_x, dup.pixel_y, dup.pol) == (3, 4, 1)
        assert dup.dx.value == 1 and dup.dy.value == 0
        assert counters.duplicated == 1

    def test_unmapped_pixel_drops_with_counter(self):
        cfg = SensorPipelineConfig(mapping={(0, 0): MappingEntry(tag=9, cores=1)})
        counters = PipelineCounters()
        assert process_sensor_event(ev(0, 0), cfg, counters)[0].tag == 9
        assert process_sensor_event(ev(1, 0), cfg, counters)[0] is None
        assert counters.unmapped == 1

    def test_stage_order_pool_before_cut(self):
        # Pool 1:2 then cut at an odd origin: distinguishes the stage order,
        # since cutting first would keep different pixels.
        cfg = full_cfg(pool_x=2, pool_y=2, cut_origin=(3, 3), cut_size=(4, 4))
        # Pixel (7, 7) pools to (3, 3) -> inside; cut-first would drop it
        # only if (7,7) were outside the raw patch [3,7)x[3,7) -> it is, so
        # the two orders disagree on this event.
        word, _ = process_sensor_event(ev(7, 7), cfg)
        assert word is not None
        assert word.tag == 0
        # Pixel (5, 5) pools to (2, 2) -> outside the patch at (3, 3).
        word, _ = process_sensor_event(ev(5, 5), cfg)
        assert word is None

    def test_event_conservation_across_counters(self):
        cfg = full_cfg(
            pixel_filter=((0, 0),),
            polarity_mode="on_only",
            cut_origin=(2, 2),
            cut_size=(8, 8),
        )
        counters = PipelineCounters()
        events = [ev(x, y, pol=p) for x in range(0, 30, 3) for y in range(0, 30, 3) for p in (0, 1)]
        for e in events:
            process_sensor_event(e, cfg, counters)
        accounted = (
            counters.filtered
            + counters.cut_dropped
            + counters.polarity_dropped
            + counters.unmapped
            + counters.mapped
        )
        assert counters.received == len(events) == accounted


class TestSourceMap:
    def test_identity_layout(self):
        cfg = full_cfg()
        word = sensor_source_map(3, 2, 1, cfg)
        assert word.tag == 2 * 64 + 3

    def test_zero_cores_entry_still_produces_word(self):
        cfg = SensorPipelineConfig(mapping={(0, 0): MappingEntry(tag=5, cores=0)})
        word, _ = process_sensor_event(ev(0, 0), cfg)
        assert word is not None and word.cores == 0  # router will drop it

    def test_shared_tags_are_indistinguishable(self):
        cfg = SensorPipelineConfig(
            mapping={(0, 0): MappingEntry(tag=5, cores=1), (1, 0): MappingEntry(tag=5, cores=1)}
        )
        w1, _ = process_sensor_event(ev(0, 0), cfg)
        w2, _ = process_sensor_event(ev(1, 0), cfg)
        assert w1 == w2

    def test_per_polarity_tables(self):
        cfg = SensorPipelineConfig(
            mapping={},
            mapping_on={(0, 0): MappingEntry(tag=1, cores=1)},
            mapping_off={(0, 0): MappingEntry(tag=2, cores=1)},
        )
        assert process_sensor_event(ev(0, 0, pol=1), cfg)[0].tag == 1
        assert process_sensor_event(ev(0, 0, pol=0), cfg)[0].tag == 2


class TestConfigValidation:
    def test_filter_limit(self):
        with pytest.raises(ConfigError):
            SensorPipelineConfig(pixel_filter=tuple((i, 0) for i in range(65)))

    def test_pool_factor_restricted(self):
        with pytest.raises(ConfigError):
            SensorPipelineConfig(pool_x=3)

    def test_patch_limit(self):
        with pytest.raises(ConfigError):
            SensorPipelineConfig(cut_size=(65, 1))

    def test_duplicate_must_be_neighbor(self):
        with pytest.raises(ConfigError):
            SensorPipelineConfig(duplicate_to=(1, 1))
