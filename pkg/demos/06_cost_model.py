"""Translate token reductions into inference-cost and emissions deltas.

Run with: python demos/06_cost_model.py
"""

from logsieve import costmodel

# Means from a 20-run reduction table: input prompts shrank from 26,543 to
# 13,355 tokens per run.
ledger = costmodel.TokenLedger(t_in_full=26543, t_in_reduced=13355)
print(f"tokens removed per run: {ledger.t_removed}")

# No prices ship with the package; supply your own sheet. Values here are
# purely illustrative.
prices = costmodel.PriceSheet(p_in=0.0025, p_out=0.01)

full_cost = costmodel.inference_cost(ledger.t_in_full, 500, prices)
reduced_cost = costmodel.inference_cost(ledger.t_in_reduced, 500, prices)
saved = costmodel.cost_delta(ledger, prices)
print(f"cost per run, full log:    {full_cost:.5f}")
print(f"cost per run, reduced log: {reduced_cost:.5f}")
print(f"input-cost delta per run:  {saved:.5f}  (= {ledger.t_removed / 1000}*p_in)")

# Emissions scale with input tokens: energy per kilotoken times grid
# intensity. Again, parameters are yours to source.
carbon = costmodel.CarbonParams(energy_per_kilotoken=0.3, grid_intensity=0.4)
print(f"avoided emissions per run: {costmodel.carbon_delta(ledger.t_removed, carbon):.4f}")

# Scaled out to a month of CI activity:
runs_per_month = 5000
print(f"\nat {runs_per_month} runs/month:")
print(f"  cost saved:  {saved * runs_per_month:,.2f}")
print(f"  co2 avoided: {costmodel.carbon_delta(ledger.t_removed, carbon) * runs_per_month:,.1f}")
