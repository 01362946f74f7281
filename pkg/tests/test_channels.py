import json

import numpy as np
import pytest

from bcconverse import AuxInputLaw, ChannelPair, ProbDist, StochasticMatrix, ValidationError, joint_from_aux, parse_channel_spec
from bcconverse.channels import (
    ChannelSpecError,
    bsc,
    legacy_aux_size,
    region_aux_size,
    test_aux_size as aux_size_for_test_joints,
)
from bcconverse.probability import conditional_mutual_information, divergence_y, divergence_z

from oracles import structured

TOL = 1e-12


def spec(w1, w2, **over):
    doc = {"X": len(w1), "Y": len(w1[0]), "Z": len(w2[0]), "W1": w1, "W2": w2}
    doc.update(over)
    return json.dumps(doc)


def test_identity_useless_spec_parses():
    ch = parse_channel_spec(spec([[1, 0], [0, 1]], [[0.5, 0.5], [0.5, 0.5]]))
    assert (ch.nx, ch.ny, ch.nz) == (2, 2, 2)


def test_row_within_tolerance_is_renormalized():
    ch = parse_channel_spec(spec([[0.5, 0.5000001], [0, 1]], [[1, 0], [0, 1]]))
    assert abs(ch.w1.rows[0].sum() - 1.0) <= TOL


def test_row_summing_to_point_eight_rejected():
    with pytest.raises(ChannelSpecError, match="W1 row 0"):
        parse_channel_spec(spec([[0.4, 0.4], [0, 1]], [[1, 0], [0, 1]]))


@pytest.mark.parametrize(
    "text, pattern",
    [
        ("not json", "not valid JSON"),
        ("[1, 2]", "JSON object"),
        (spec([[1, 0], [0, 1]], [[1, 0], [0, 1]], extra=1), "unexpected"),
        (spec([[1, 0], [0, 1]], [[1, 0], [0, 1]], X=3), "expected 3 rows"),
        (spec([[1, 0], [0, 1]], [[1, 0], [0, 1]], Y=0), "positive integer"),
        (spec([[1, -0.0001], [0, 1]], [[1, 0], [0, 1]]), "negative"),
        (spec([[1, "a"], [0, 1]], [[1, 0], [0, 1]]), "not a number"),
        (spec([[1, 0, 0], [0, 1]], [[1, 0], [0, 1]], Y=2), "expected 2 columns"),
    ],
)
def test_malformed_specs_rejected(text, pattern):
    with pytest.raises(ChannelSpecError, match=pattern):
        parse_channel_spec(text)


def test_mismatched_input_alphabets_rejected():
    with pytest.raises(ValidationError, match="input symbols"):
        ChannelPair.from_arrays(np.eye(2), np.eye(3))


def test_spec_round_trip():
    ch = ChannelPair.from_arrays(bsc(0.1), bsc(0.25))
    again = parse_channel_spec(json.dumps(ch.to_dict()))
    assert np.array_equal(again.w1.rows, ch.w1.rows)
    assert np.array_equal(again.w2.rows, ch.w2.rows)


def test_constant_u_uniform_input_gives_product_joint():
    ch = ChannelPair.from_arrays(np.eye(2), np.full((2, 2), 0.5))
    aux = AuxInputLaw(ProbDist(np.array([1.0])), StochasticMatrix(np.array([[0.5, 0.5]])))
    j = joint_from_aux(aux, ch)
    assert abs(conditional_mutual_information(j, "I(U;Z)")) <= TOL
    assert np.allclose(j.mass[0], np.eye(2)[:, :, None] * 0.25, atol=TOL)


def test_joint_from_aux_matches_per_entry_product():
    pu = np.array([0.3, 0.7])
    px_u = np.array([[0.9, 0.1], [0.25, 0.75]])
    w1, w2 = bsc(0.1), bsc(0.3)
    ch = ChannelPair.from_arrays(w1, w2)
    j = joint_from_aux(AuxInputLaw(ProbDist(pu), StochasticMatrix(px_u)), ch)
    assert j.shape == (2, 2, 2, 2)
    assert np.allclose(j.mass, structured(pu, px_u, w1, w2), atol=TOL, rtol=0)


def test_joint_from_aux_has_zero_channel_divergences():
    ch = ChannelPair.from_arrays(bsc(0.2), bsc(0.05))
    aux = AuxInputLaw(ProbDist(np.array([0.5, 0.2, 0.3])), StochasticMatrix(np.array([[1, 0], [0.5, 0.5], [0.1, 0.9]])))
    j = joint_from_aux(aux, ch)
    assert abs(divergence_y(j, ch.w1)) <= TOL
    assert abs(divergence_z(j, ch.w2)) <= TOL


def test_joint_from_aux_checks_input_alphabet():
    ch = ChannelPair.from_arrays(np.eye(3), np.eye(3))
    aux = AuxInputLaw(ProbDist(np.array([1.0])), StochasticMatrix(np.array([[0.5, 0.5]])))
    with pytest.raises(ValidationError, match="input symbols"):
        joint_from_aux(aux, ch)


def test_aux_law_from_joint_handles_empty_row():
    aux = AuxInputLaw.from_joint_ux(np.array([[0.5, 0.5], [0.0, 0.0]]))
    assert np.allclose(aux.p_u.mass, [1.0, 0.0])
    assert np.allclose(aux.p_x_given_u.rows[1], [0.5, 0.5])


def test_cardinality_bounds_for_binary_alphabets():
    assert region_aux_size(2, 2, 2) == 2
    assert aux_size_for_test_joints(2, 2) == 3
    assert legacy_aux_size(2, 2, 2) == 3
    assert region_aux_size(5, 2, 2) == 3
