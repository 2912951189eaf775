"""Route generation on a seven-zone bus network.

Five O-D flows share the links 1-2, 2-5, 4-5, 5-6, 3-5 and 5-7. Each
link carries one bus segment at a 5-minute design headway. The script
compares two ways of chaining those segments into routes:

* a myopic rule that joins, at every zone, the pair of segments that
  shares the most through-flow, and
* the route MILP, which picks junctions to minimise intramodal transfers
  over all trips at once.

Run with ``python demos/seven_zone_routes.py``.
"""
from mmtransit.routes import (ModeFlows, assemble_routes, build_route_model, count_transfers,
                              derive_segments, myopic_routes, solve_routes)

RUNS = [
    (1, 5, (1, 2, 5), 10.0),
    (1, 7, (1, 2, 5, 7), 40.0),
    (2, 6, (2, 5, 6), 50.0),
    (4, 6, (4, 5, 6), 40.0),
    (3, 7, (3, 5, 7), 10.0),
]


def show(title, plan, flows):
    tc = count_transfers(plan, flows)
    print(title)
    for r in plan.routes:
        print("  route " + "-".join(map(str, r.zones)))
    for (o, d), n in sorted(tc.by_od.items()):
        print(f"  {o}->{d}: {n:g} transfers")
    print(f"  total: {tc.total:g}\n")
    return tc.total


def main():
    flows = ModeFlows("LBUS", RUNS)
    net = derive_segments(flows, "LBUS", h_design=5 / 60, r_design=30)
    print("segments per link:", dict(sorted(net.counts.items())), "\n")

    myopic = show("Myopic chaining", myopic_routes(net, flows), flows)
    rsol = solve_routes(build_route_model(net, flows))
    best = show("Route MILP", assemble_routes(rsol), flows)
    print(f"the MILP saves {myopic - best:g} transfers ({rsol.nodes} B&B nodes)")


if __name__ == "__main__":
    main()
