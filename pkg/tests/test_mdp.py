from __future__ import annotations

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import line_schema, random_small_mdp
from rashomon_mdp.mdp import (
    ExplicitDtmc,
    ExplicitMdp,
    FeatureSchema,
    ModelFormatError,
    model_fingerprint,
    read_explicit,
    validate_dtmc,
    validate_mdp,
    write_explicit,
)


def _chain(transitions, n, initial=0):
    return ExplicitDtmc(
        schema=line_schema(n),
        states=tuple((i,) for i in range(n)),
        transitions=transitions,
        initial=initial,
    )


def _two_action_mdp():
    return ExplicitMdp(
        schema=line_schema(3),
        states=((0,), (1,), (2,)),
        actions=("go", "stay"),
        transitions=(
            (((1, 0.5), (2, 0.5)), ((0, 1.0),)),
            (((1, 1.0),), None),
            (None, ((2, 1.0),)),
        ),
        initial=0,
    )


class TestFeatureSchema:
    def test_basic_lookup(self):
        schema = FeatureSchema(names=("a", "b"), bounds=((0, 3), (-1, 1)))
        assert schema.dim == 2
        assert schema.index_of("b") == 1
        schema.check_state((3, -1))

    def test_out_of_bounds_state(self):
        schema = FeatureSchema(names=("a",), bounds=((0, 3),))
        with pytest.raises(ValueError):
            schema.check_state((4,))
        with pytest.raises(ValueError):
            schema.check_state((0, 0))

    def test_bad_constructions(self):
        with pytest.raises(ValueError):
            FeatureSchema(names=(), bounds=())
        with pytest.raises(ValueError):
            FeatureSchema(names=("a", "a"), bounds=((0, 1), (0, 1)))
        with pytest.raises(ValueError):
            FeatureSchema(names=("a",), bounds=((2, 1),))
        with pytest.raises(ValueError):
            FeatureSchema(names=("bad name",), bounds=((0, 1),))

    def test_normal_divisors_never_zero(self):
        schema = FeatureSchema(names=("z", "w"), bounds=((0, 0), (-4, 2)))
        assert schema.normal_divisors() == (1.0, 4.0)


class TestValidation:
    def test_clean_models(self):
        full = ExplicitMdp(
            schema=line_schema(2),
            states=((0,), (1,)),
            actions=("go", "stay"),
            transitions=(
                (((1, 1.0),), ((0, 1.0),)),
                (((1, 1.0),), ((1, 1.0),)),
            ),
            initial=0,
        )
        assert validate_mdp(full) == []
        d = _chain((((1, 1.0),), ((1, 1.0),)), 2)
        assert validate_dtmc(d) == []

    def test_partial_mdp_reports_only_missing_actions(self):
        # None rows are legal for induced sub-MDPs; the validator flags
        # them with a dedicated kind callers can filter.
        kinds = {v.kind for v in validate_mdp(_two_action_mdp())}
        assert kinds == {"missing-action"}

    def test_distribution_sum_violation(self):
        d = _chain((((1, 0.6), (0, 0.6)), ((1, 1.0),)), 2)
        kinds = [v.kind for v in validate_dtmc(d)]
        assert kinds == ["distribution-sum"]

    def test_probability_range_violation(self):
        d = _chain((((1, 1.5), (0, -0.5)), ((1, 1.0),)), 2)
        kinds = {v.kind for v in validate_dtmc(d)}
        assert "probability-range" in kinds

    def test_bad_successor_violation(self):
        d = _chain((((5, 1.0),), ((1, 1.0),)), 2)
        kinds = [v.kind for v in validate_dtmc(d)]
        assert "bad-successor" in kinds

    def test_duplicate_state_violation(self):
        d = ExplicitDtmc(
            schema=line_schema(2),
            states=((0,), (0,)),
            transitions=(((0, 1.0),), ((1, 1.0),)),
            initial=0,
        )
        assert "duplicate-state" in {v.kind for v in validate_dtmc(d)}

    def test_state_bounds_violation(self):
        d = ExplicitDtmc(
            schema=FeatureSchema(("s",), ((0, 0),)),
            states=((7,),),
            transitions=(((0, 1.0),),),
            initial=0,
        )
        assert "state-bounds" in {v.kind for v in validate_dtmc(d)}

    def test_missing_action_and_dead_state(self):
        m = ExplicitMdp(
            schema=line_schema(2),
            states=((0,), (1,)),
            actions=("a", "b"),
            transitions=((((1, 1.0),), None), (None, None)),
            initial=0,
        )
        vs = validate_mdp(m)
        assert [v.kind for v in vs if v.state == 0] == ["missing-action"]
        assert {v.kind for v in vs if v.state == 1} == {"missing-action", "dead-state"}

    def test_bad_initial(self):
        d = _chain((((0, 1.0),),), 1, initial=3)
        assert "bad-initial" in {v.kind for v in validate_dtmc(d)}


class TestSerialization:
    def test_mdp_roundtrip_exact(self):
        m = _two_action_mdp()
        text = write_explicit(m)
        back = read_explicit(io.StringIO(text))
        assert back == m
        assert write_explicit(back) == text

    def test_dtmc_roundtrip_exact(self):
        d = _chain((((1, 1.0 / 3.0), (0, 2.0 / 3.0)), ((1, 1.0),)), 2, initial=1)
        back = read_explicit(io.StringIO(write_explicit(d)))
        assert back == d
        # 17-significant-digit floats survive the trip bit for bit
        assert back.transitions[0][0][1] == 1.0 / 3.0

    def test_write_to_path(self, tmp_path):
        m = _two_action_mdp()
        dest = tmp_path / "model.explicit"
        text = write_explicit(m, dest)
        assert dest.read_text() == text
        assert read_explicit(dest) == m

    def test_fingerprint_tracks_content(self):
        m = _two_action_mdp()
        fp1 = model_fingerprint(m)
        assert fp1 == model_fingerprint(m)
        assert len(fp1) == 64
        other = ExplicitMdp(
            schema=m.schema,
            states=m.states,
            actions=m.actions,
            transitions=m.transitions,
            initial=1,
        )
        assert model_fingerprint(other) != fp1

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=60, deadline=None)
    def test_random_mdp_roundtrip(self, seed):
        m, _ = random_small_mdp(np.random.default_rng(seed))
        back = read_explicit(io.StringIO(write_explicit(m)))
        assert back == m
        assert model_fingerprint(back) == model_fingerprint(m)


class TestReaderErrors:
    def _read(self, text):
        return read_explicit(io.StringIO(text))

    def test_missing_header(self):
        with pytest.raises(ModelFormatError, match="missing MODEL header"):
            self._read("\n")
        with pytest.raises(ModelFormatError, match="SCHEMA before MODEL"):
            self._read("SCHEMA s:0:1\n")

    def test_unknown_tag_has_line_number(self):
        with pytest.raises(ModelFormatError, match="line 2"):
            self._read("MODEL dtmc\nBOGUS 1\n")

    def test_action_index_out_of_range(self):
        text = (
            "MODEL mdp\nSCHEMA s:0:1\nACTIONS a\nINITIAL 0\n"
            "STATE 0 0\nSTATE 1 1\nTRANS 0 3 1 1.0\n"
        )
        with pytest.raises(ModelFormatError, match="action index 3 out of range"):
            self._read(text)

    def test_successor_out_of_range(self):
        text = "MODEL dtmc\nSCHEMA s:0:1\nINITIAL 0\nSTATE 0 0\nTRANS 0 9 1.0\n"
        with pytest.raises(ModelFormatError, match="successor state 9"):
            self._read(text)

    def test_bad_probability(self):
        text = "MODEL dtmc\nSCHEMA s:0:0\nINITIAL 0\nSTATE 0 0\nTRANS 0 0 1.5\n"
        with pytest.raises(ModelFormatError, match=r"outside \(0, 1\]"):
            self._read(text)

    def test_non_stochastic_row(self):
        text = (
            "MODEL dtmc\nSCHEMA s:0:1\nINITIAL 0\n"
            "STATE 0 0\nSTATE 1 1\nTRANS 0 0 0.5\nTRANS 1 1 1.0\n"
        )
        with pytest.raises(ModelFormatError, match="sums to"):
            self._read(text)

    def test_duplicate_transition(self):
        text = (
            "MODEL dtmc\nSCHEMA s:0:0\nINITIAL 0\nSTATE 0 0\n"
            "TRANS 0 0 0.5\nTRANS 0 0 0.5\n"
        )
        with pytest.raises(ModelFormatError, match="duplicate transition"):
            self._read(text)

    def test_state_out_of_order(self):
        text = "MODEL dtmc\nSCHEMA s:0:1\nINITIAL 0\nSTATE 1 1\n"
        with pytest.raises(ModelFormatError, match="out of order"):
            self._read(text)

    def test_dtmc_state_without_row(self):
        text = "MODEL dtmc\nSCHEMA s:0:1\nINITIAL 0\nSTATE 0 0\nSTATE 1 1\nTRANS 0 0 1.0\n"
        with pytest.raises(ModelFormatError, match="no outgoing transitions"):
            self._read(text)
