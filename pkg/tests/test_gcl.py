import pytest

import numpy as np

from windcheck import gcl
from windcheck.dtmc import serialize
from windcheck.expr import GclSyntaxError, parse_expression_text
from windcheck.gcl import (BuildOptions, DeadlockError, DomainError,
                           GclValidationError, StateCapError,
                           compose_and_build, parse_model)

MINIMAL = """
dtmc
module M
  s : [0..1] init 0;
  [] s=0 -> 1.0:(s'=1);
endmodule
"""


def test_parse_minimal_model():
    m = parse_model(MINIMAL)
    assert len(m.modules) == 1
    assert len(m.modules[0].commands) == 1
    v = m.modules[0].variables[0]
    assert (v.name, v.lo, v.hi, v.init) == ("s", 0, 1, 0)


def test_probabilities_summing_to_one_accepted():
    parse_model("""
dtmc
module M
  s : [0..2] init 0;
  [] s=0 -> 0.3:(s'=1) + 0.7:(s'=2);
  [] s>0 -> true;
endmodule
""")


def test_probability_sum_violation_reported():
    with pytest.raises(GclValidationError, match=r"sum to 0\.9"):
        parse_model("""
dtmc
module M
  s : [0..2] init 0;
  [] s=0 -> 0.3:(s'=1) + 0.6:(s'=2);
endmodule
""")


def test_probability_outside_unit_interval():
    with pytest.raises(GclValidationError, match="outside"):
        parse_model("""
dtmc
module M
  s : [0..1] init 0;
  [] s=0 -> 1.5:(s'=1) + -0.5:(s'=0);
endmodule
""")


def test_undeclared_variable_rejected():
    with pytest.raises((GclValidationError, gcl.GclTypeError)):
        parse_model("""
dtmc
module M
  s : [0..1] init 0;
  [] s=0 & q=1 -> (s'=1);
endmodule
""")


def test_assigning_other_modules_variable_rejected():
    with pytest.raises(GclValidationError, match="another module"):
        parse_model("""
dtmc
module A
  x : [0..1] init 0;
  [] x=0 -> (y'=1);
endmodule
module B
  y : [0..1] init 0;
endmodule
""")


def test_syntax_error_carries_position():
    with pytest.raises(GclSyntaxError) as err:
        parse_model("dtmc\nmodule M\n  s : [0..1] init 0;\n  [] s=0 -> (s'=;\nendmodule\n")
    assert "line 4" in str(err.value)


def test_formula_cycle_detected():
    with pytest.raises(GclValidationError, match="cyclic"):
        parse_model("""
dtmc
formula a = b + 1;
formula b = a + 1;
module M
  s : [0..1] init 0;
  [] true -> true;
endmodule
""")


def test_int_variable_needs_int_expression():
    with pytest.raises(GclValidationError, match="floor"):
        parse_model("""
dtmc
module M
  s : [0..3] init 0;
  [] true -> (s'=s/2);
endmodule
""")


def test_chain_build_and_deadlock_handling():
    text = """
dtmc
module M
  s : [0..1] init 0;
  [] s=0 -> (s'=1);
endmodule
"""
    m = parse_model(text)
    with pytest.raises(DeadlockError):
        compose_and_build(m)
    d = compose_and_build(m, BuildOptions(fix_deadlocks=True))
    assert d.n_states == 2
    rows = [(s, int(t), float(p)) for s in range(2)
            for t, p in zip(*d.row(s))]
    assert rows == [(0, 1, 1.0), (1, 1, 1.0)]


SYNC = """
dtmc
module A
  x : [0..1] init 0;
  [a] x=0 -> 0.5:(x'=1) + 0.5:(x'=0);
  [] x=1 -> true;
endmodule
module B
  y : [0..1] init 0;
  [a] y=0 -> 0.5:(y'=1) + 0.5:(y'=0);
  [] y=1 -> true;
endmodule
"""


def test_synchronization_multiplies_probabilities():
    d = compose_and_build(parse_model(SYNC))
    dst, p = d.row(0)
    assert len(dst) == 4
    assert np.allclose(p, 0.25)


def test_uniform_weighting_of_simultaneous_commands():
    # two unlabeled commands enabled in the same state get weight 1/2 each
    d = compose_and_build(parse_model("""
dtmc
module M
  s : [0..2] init 0;
  [] s=0 -> (s'=1);
  [] s=0 -> (s'=2);
  [] s>0 -> true;
endmodule
"""))
    row = dict(zip(*(arr.tolist() for arr in d.row(0))))
    assert row == {1: 0.5, 2: 0.5}


def test_blocked_synchronization_is_not_taken():
    # B never enables action a, so A's a-command can never fire
    d = compose_and_build(parse_model("""
dtmc
module A
  x : [0..1] init 0;
  [a] x=0 -> (x'=1);
  [] x=0 -> (x'=0);
endmodule
module B
  y : [0..1] init 1;
  [a] y=0 -> (y'=1);
endmodule
"""))
    assert d.n_states == 1
    dst, p = d.row(0)
    assert dst.tolist() == [0] and p.tolist() == [1.0]


def test_domain_overflow_detected():
    with pytest.raises(DomainError, match="outside"):
        compose_and_build(parse_model("""
dtmc
module M
  s : [0..1] init 0;
  [] true -> (s'=s+1);
endmodule
"""))


def test_state_cap():
    text = """
dtmc
module M
  s : [0..1000] init 0;
  [] s<1000 -> (s'=s+1);
  [] s=1000 -> true;
endmodule
"""
    with pytest.raises(StateCapError):
        compose_and_build(parse_model(text), BuildOptions(state_cap=10))


def test_exploration_deterministic_and_serialization_stable():
    m1 = compose_and_build(parse_model(SYNC))
    m2 = compose_and_build(parse_model(SYNC))
    assert serialize(m1) == serialize(m2)


def test_row_stochastic_after_build():
    d = compose_and_build(parse_model(SYNC))
    for s in range(d.n_states):
        _, p = d.row(s)
        assert abs(p.sum() - 1.0) <= 1e-12


def test_zero_probability_branches_dropped():
    d = compose_and_build(parse_model("""
dtmc
const double p = 0;
module M
  s : [0..1] init 0;
  [] s=0 -> p:(s'=1) + 1-p:(s'=0);
  [] s=1 -> true;
endmodule
"""))
    assert d.n_states == 1
    assert d.probs.tolist() == [1.0]


def test_constants_and_formulas_evaluate():
    d = compose_and_build(parse_model("""
dtmc
const int top = 3;
formula nxt = min(s + 1, top);
module M
  s : [0..3] init 0;
  [] s<top -> (s'=nxt);
  [] s=top -> true;
endmodule
"""))
    assert d.n_states == 4


def test_action_rewards_attach_to_transitions():
    d = compose_and_build(parse_model("""
dtmc
module M
  s : [0..1] init 0;
  [go] s=0 -> (s'=1);
  [] s=1 -> true;
endmodule
rewards "steps"
  [go] true : 2.5;
endrewards
"""))
    rs = d.rewards["steps"]
    assert rs.trans_rewards is not None
    assert rs.trans_rewards[0] == 2.5


def test_state_rewards_evaluate_per_state():
    d = compose_and_build(parse_model("""
dtmc
module M
  s : [0..2] init 0;
  [] s<2 -> (s'=s+1);
  [] s=2 -> true;
endmodule
rewards "level"
  s>0 : s * 1.5;
endrewards
"""))
    assert d.rewards["level"].state_rewards.tolist() == [0.0, 1.5, 3.0]


def test_negative_reward_rejected():
    with pytest.raises(GclValidationError, match="negative"):
        compose_and_build(parse_model("""
dtmc
module M
  s : [0..1] init 0;
  [] s=0 -> (s'=1);
  [] s=1 -> true;
endmodule
rewards "bad"
  true : -1;
endrewards
"""))


def test_labels_evaluated_per_state():
    d = compose_and_build(parse_model("""
dtmc
module M
  s : [0..2] init 0;
  [] s<2 -> (s'=s+1);
  [] s=2 -> true;
endmodule
label "goal" = s=2;
label "start" = s=0;
"""))
    assert d.labels["goal"].tolist() == [False, False, True]
    assert d.labels["start"].tolist() == [True, False, False]


def test_expression_precedence():
    e = parse_expression_text("!a = 3 & b < 2 | c >= 1")
    # parses as ((!(a=3)) & (b<2)) | (c>=1)
    assert str(e).count("|") == 1
