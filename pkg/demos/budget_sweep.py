"""How the infrastructure budget shapes a small synthetic city.

A 10-zone city is served by SAVs, local buses and BRT. No BRT exists at
first, so every BRT link must be bought at its per-km capital cost. The
script solves the zonal connection model at several budgets and reports
the objective, the BRT kilometres built and the modal split.

Run with ``python demos/budget_sweep.py [OUTDIR]``.
"""
import sys
import tempfile
from pathlib import Path

from mmtransit.pipeline import documents as docs
from mmtransit.pipeline import load_config, run_scenario
from mmtransit.pipeline.io import read_json
from mmtransit.synthetic import ZonalInstance, synthetic_city, write_scenario_files
from mmtransit.zonal import ZonalOptions, solve_zonal, summarize

BUDGETS = [0.0, 1e8, 2e8, 3e8, 5e8]


def load_instance(out_dir: Path, profile) -> ZonalInstance:
    zones, demand = docs.zones_from_doc(read_json(out_dir / "zones.json"))
    links = docs.links_from_doc(read_json(out_dir / "links.json"))
    costs = docs.costs_from_doc(read_json(out_dir / "costs.json"))
    return ZonalInstance(zones, demand, links, costs, profile)


def main(work: Path):
    city = synthetic_city(10, 4, 45, seed=7)
    cfg = load_config(write_scenario_files(city, work, 10, ["BRT", "LBUS", "SAV"]))
    # zoning, candidate links and cost tables do not depend on the budget
    run_scenario(cfg, ["cluster", "links", "costs"])
    inst = load_instance(cfg.out_dir, cfg.profile)
    print(f"{inst.demand.matrix.sum():.0f} trips/h over {len(inst.zones)} zones\n")
    print(f"{'budget M$':>10} {'objective':>12} {'BRT km':>7} {'BRT %':>6} {'LBUS %':>7} "
          f"{'SAV %':>6} {'nodes':>6}")
    for b in BUDGETS:
        sol = solve_zonal(inst.build(ZonalOptions(budget=b)), rel_gap=0.0)
        m = summarize(sol)
        km = sum(inst.costs.link_dist[k] * (x - inst.links.exist(*k))
                 for k, x in sol.xl.items() if k[0] == "BRT" and k[1] < k[2])
        s = m.split_trips
        print(f"{b / 1e6:10.0f} {sol.objective:12.1f} {km:7.1f} {s['BRT']:6.1f} "
              f"{s['LBUS']:7.1f} {s['SAV']:6.1f} {sol.nodes:6d}")


if __name__ == "__main__":
    if len(sys.argv) > 1:
        main(Path(sys.argv[1]))
    else:
        with tempfile.TemporaryDirectory() as d:
            main(Path(d))
