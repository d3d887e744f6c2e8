"""Line the concrete baseline run up against the symbolic attack trace.

Each message the merchant sends or receives in the concrete run is mapped
back to a term (signatures are checked first, byte strings become
constants) and unified with the corresponding step of the attack trace.
"""
from importlib import resources

from bip70dy import Attack, parse
from bip70dy.bip70.bridge import BridgeError, bridge
from bip70dy.bip70.crypto import get_backend
from bip70dy.bip70.scenario import run_silkroad_scenario
from bip70dy.search import check
from bip70dy.term import render

spec = parse(resources.files("bip70dy.fixtures").joinpath("bip70_baseline.anbp").read_text())
verdict = check(spec)
assert isinstance(verdict, Attack)
backend = get_backend("secp256k1")
merchant_key = backend.keygen(b"merchant/cert").public

subst = bridge(spec, verdict.trace, run_silkroad_scenario("baseline"), backend, merchant_key)
print("baseline run fits the attack trace; merchant values:")
for var, val in sorted(subst.items()):
    if var.startswith("m:"):
        print(f"  {var[2:]:12} = {render(val)[:70]}")

try:
    bridge(spec, verdict.trace, run_silkroad_scenario("endorsed"), backend, merchant_key)
except BridgeError as e:
    print("endorsed run does not fit:", str(e)[:100], "...")
