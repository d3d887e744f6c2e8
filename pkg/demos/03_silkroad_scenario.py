"""Run the Silkroad Trader scenario with real signatures under every protocol variant.

A customer buys from an honest merchant, lists the trader's address as the
refund address, cancels, and the merchant's refund pays the trader.  Under
the baseline nobody can later prove who chose that address; with endorsed
refunds the merchant holds the customer's signature over it.
"""
from bip70dy.bip70.scenario import WALLET_MODES, run_silkroad_scenario

for variant in ("baseline", "endorsed", "merchant-bound"):
    for wallet in WALLET_MODES:
        r = run_silkroad_scenario(variant, wallet)
        audit = type(r.audit).__name__ if r.audit else "-"
        reason = getattr(r.audit, "reason", "") or r.reject_reason or ""
        print(f"{variant:15} {wallet:10} {r.outcome:17} trader_paid={r.trader_address in r.refund_destination!s:5} "
              f"audit={audit:8} deniable={r.deniability!s:5} {reason}")

print()
print("\n".join(run_silkroad_scenario("baseline").records()))
