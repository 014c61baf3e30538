import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridbo.core import (
    EffectiveKind,
    Encoding,
    MixedPoint,
    ProblemSpec,
    SampleHistory,
    SpecError,
    VariableSpec,
    classify_integer_variable,
    decode_integer,
    encode_categorical,
    generate_pilots,
)


class TestVariableSpec:
    def test_categorical_needs_two_distinct_labels(self):
        with pytest.raises(SpecError):
            VariableSpec.categorical("c", ["a"])
        with pytest.raises(SpecError):
            VariableSpec.categorical("c", ["a", "a"])

    def test_bounds_must_be_ordered(self):
        with pytest.raises(SpecError):
            VariableSpec.continuous("x", 1.0, 1.0)
        with pytest.raises(SpecError):
            VariableSpec.integer("k", 3, 3)

    def test_round_trip_dict(self):
        for v in (
            VariableSpec.categorical("c", ["a", "b"]),
            VariableSpec.continuous("x", -1, 2),
            VariableSpec.integer("k", 0, 4),
        ):
            assert VariableSpec.from_dict(v.to_dict()) == v


class TestClassifyInteger:
    def test_small_range_is_categorical(self):
        assert classify_integer_variable(VariableSpec.integer("k", 0, 2), 10) is EffectiveKind.CATEGORICAL

    def test_large_range_is_rounded_continuous(self):
        assert classify_integer_variable(VariableSpec.integer("k", 0, 99), 10) is EffectiveKind.ROUNDED

    def test_boundary_is_categorical(self):
        assert classify_integer_variable(VariableSpec.integer("k", 0, 9), 10) is EffectiveKind.CATEGORICAL

    def test_rejects_non_integer(self):
        with pytest.raises(SpecError):
            classify_integer_variable(VariableSpec.continuous("x", 0, 1), 10)


def test_problem_normalizes_integers(mixed_problem):
    p = mixed_problem
    assert p.cat_sizes == (3, 3)
    assert p.n_con == 2
    assert p.n_leaves == 9
    assert [e.kind for e in p.con_vars] == [EffectiveKind.CONTINUOUS, EffectiveKind.ROUNDED]
    assert p.cat_vars[1].labels == ("0", "1", "2")


def test_problem_json_round_trip(tmp_path, mixed_problem):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(mixed_problem.to_dict()))
    again = ProblemSpec.from_json(path)
    assert again.to_dict() == mixed_problem.to_dict()


def test_problem_requires_variables():
    with pytest.raises(SpecError):
        ProblemSpec([])
    with pytest.raises(SpecError):
        ProblemSpec.from_dict({"variables": [{"name": "x", "type": "banana"}]})


class TestEncode:
    def setup_method(self):
        self.problem = ProblemSpec(
            [VariableSpec.categorical("c", ["a", "b", "c"]), VariableSpec.continuous("x", 0, 5)]
        )
        self.cat_only = ProblemSpec([VariableSpec.categorical("c", ["a", "b", "c"])])

    def test_integer_code_first_index(self):
        v = encode_categorical(MixedPoint.make([0], []), self.cat_only, Encoding.INTEGER)
        np.testing.assert_array_equal(v, [0.0])

    def test_one_hot(self):
        v = encode_categorical(MixedPoint.make([1], []), self.cat_only, Encoding.ONEHOT)
        np.testing.assert_array_equal(v, [0.0, 1.0, 0.0])

    def test_continuous_rescaled(self):
        v = encode_categorical(MixedPoint.make([1], [2.5]), self.problem, "integer")
        np.testing.assert_array_equal(v, [1.0, 0.5])

    def test_out_of_range_index(self):
        with pytest.raises(SpecError):
            encode_categorical(MixedPoint.make([3], [1.0]), self.problem)


MIXED = ProblemSpec(
    [
        VariableSpec.categorical("color", ["a", "b", "c"]),
        VariableSpec.continuous("t", 0.0, 5.0),
        VariableSpec.integer("k", 0, 2),
        VariableSpec.integer("m", 0, 99),
    ]
)

point_strategy = st.tuples(
    st.integers(0, 2), st.integers(0, 2), st.floats(0, 5), st.integers(0, 99)
)


@given(point_strategy)
def test_integer_code_round_trip(raw):
    c, k, t, m = raw
    p = MixedPoint.make([c, k], [t, float(m)])
    back = decode_integer(encode_categorical(p, MIXED), MIXED)
    assert back.cat == p.cat
    np.testing.assert_allclose(back.con, p.con, rtol=0, atol=1e-12)


@given(point_strategy)
def test_one_hot_sums_to_one_per_variable(raw):
    c, k, t, m = raw
    v = encode_categorical(MixedPoint.make([c, k], [t, float(m)]), MIXED, "onehot")
    assert v[:3].sum() == 1.0 and v[3:6].sum() == 1.0


def test_decode_and_values_round_trip(mixed_problem):
    p = MixedPoint.make([2, 1], [1.25, 17.0])
    values = mixed_problem.decode(p)
    assert values == {"color": "c", "t": 1.25, "k": 1, "m": 17}
    assert mixed_problem.point_from_values(values) == p


class TestPilots:
    def test_single_pilot_in_bounds(self, mixed_problem):
        (p,) = generate_pilots(mixed_problem, 1, seed=0)
        mixed_problem.validate(p)

    def test_deterministic(self, mixed_problem):
        assert generate_pilots(mixed_problem, 10, 7) == generate_pilots(mixed_problem, 10, 7)

    def test_latin_hypercube_strata(self):
        problem = ProblemSpec([VariableSpec.continuous("x", 0.0, 1.0)])
        xs = np.array([p.con[0] for p in generate_pilots(problem, 10, seed=3)])
        strata = np.floor(xs * 10).astype(int)
        assert sorted(strata) == list(range(10))

    def test_rounded_variables_land_on_integers(self, mixed_problem):
        for p in generate_pilots(mixed_problem, 20, seed=1):
            assert p.con[1] == round(p.con[1])
            mixed_problem.validate(p)

    def test_rejects_zero(self, mixed_problem):
        with pytest.raises(SpecError):
            generate_pilots(mixed_problem, 0, 0)


@settings(max_examples=50)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_best_so_far_monotone(values):
    h = SampleHistory()
    for v in values:
        h.append(MixedPoint.make([], [0.0]), v)
    best = h.best_so_far()
    assert np.all(np.diff(best) >= 0)
    assert best[-1] == max(values)
