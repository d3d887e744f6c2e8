"""Check both endorsement fixes, and show that removing the endorsement breaks them again."""
import time
from importlib import resources

from bip70dy import parse
from bip70dy.model import goal_text
from bip70dy.search import SearchConfig, check_goals


def load(name):
    return parse(resources.files("bip70dy.fixtures").joinpath(name + ".anbp").read_text())


for name in ("bip70_endorsed", "bip70_merchant_bound", "bip70_endorsed_mutant"):
    t0 = time.perf_counter()
    results = check_goals(load(name), SearchConfig(sessions=1))
    print(f"{name}  ({time.perf_counter() - t0:.1f} s)")
    for goal, verdict in results:
        print(f"  {type(verdict).__name__:8} {goal_text(goal)}")
