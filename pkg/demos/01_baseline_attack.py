"""Find the refund-address attack on unmodified BIP70.

The intruder plays customer C1, who talks to the merchant under a pseudonym
and assembles the transaction together with C2.  C1 simply puts a refund
address of its choosing into C2's refund entry; the merchant has no way to
tell, because refund entries are not signed.
"""
from importlib import resources

from bip70dy import Attack, parse
from bip70dy.model import goal_text
from bip70dy.search import SearchConfig, check_goals, format_trace, replay

spec = parse(resources.files("bip70dy.fixtures").joinpath("bip70_baseline.anbp").read_text())

for goal, verdict in check_goals(spec, SearchConfig(sessions=1)):
    print(f"{type(verdict).__name__:8} {goal_text(goal)}  ({verdict.states_explored} states)")

attacks = [(g, v) for g, v in check_goals(spec) if isinstance(v, Attack)]
goal, verdict = attacks[0]
print()
print(format_trace(verdict.trace, spec))
print("step 5 is sent by the intruder; look at C2's refund pair: it is (ni, beta2#1),")
print("not the RC2#1 that C2 handed over in step 4.")
print("replay:", goal_text(replay(spec, verdict.trace).goal))
