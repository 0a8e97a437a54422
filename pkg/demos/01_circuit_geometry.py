"""Tour of the circuit model: brickwork layers, the spacetime interaction
graph, graph distances, boundaries, and lattice balls.

Run:  python demos/01_circuit_geometry.py
"""

import math

from noisycircuits import (
    ball,
    boundary_size,
    brickwork_circuit,
    build_interaction_graph,
    graph_distance,
)

spec = brickwork_circuit(geometry=(8,), h=2, depth=3, p=0.1, kind="haar", seed=1)
print(f"chain of n={spec.n} qubits, depth {spec.depth}, uniform rate 0.1")
for j, layer in enumerate(spec.layers):
    print(f"  layer {j}: gates on {[g.sites for g in layer]}")

graph = build_interaction_graph(spec)
print(f"\ninteraction graph: {spec.n * spec.depth} vertices, "
      f"{len(graph.edges())} edges, max degree {graph.max_degree()} (<= 4)")

print("\ndistances between site columns (spacetime shortest paths):")
for a, c in [(0, 1), (0, 4), (0, 7), (3, 5)]:
    d = graph_distance(graph, [a], [c])
    print(f"  l(A={{{a}}}, C={{{c}}}) = {d if math.isfinite(d) else 'inf'}")

print("\nboundary edge counts:")
for region in [[0], [0, 1, 2], list(range(8))]:
    print(f"  boundary({region}) = {boundary_size(graph, region)}")

print("\nlattice balls around site 4 (sampler conditioning regions):")
for radius in range(4):
    print(f"  radius {radius}: {sorted(ball(spec, 4, radius))}")

grid = brickwork_circuit(geometry=(4, 4), h=2, depth=2, p=0.05, kind="haar", seed=2)
center = grid.site((1, 1))
print(f"\n2D 4x4 grid, ball of radius 1 around (1,1): "
      f"{sorted(grid.coords(s) for s in ball(grid, center, 1))}")
