/** Left-to-right layered DAG layout: longest-path layering with barycenter
 * ordering inside each layer. Used for the lineage view (L3) and the
 * architecture view (L2). */

export interface LayoutOptions {
  nodeWidth: number;
  nodeHeight: number;
  gapX: number;
  gapY: number;
}

export const DEFAULT_LAYOUT: LayoutOptions = {
  nodeWidth: 150,
  nodeHeight: 64,
  gapX: 70,
  gapY: 28,
};

export interface PlacedNode {
  id: string;
  rank: number;
  order: number;
  x: number;
  y: number;
  width: number;
  height: number;
}

export function longestPathRanks(nodes: string[],
                                 edges: [string, string][]): Map<string, number> {
  const incoming = new Map<string, string[]>(nodes.map((n) => [n, []]));
  for (const [a, b] of edges) {
    const into = incoming.get(b);
    if (into === undefined || !incoming.has(a)) {
      throw new Error(`edge (${a}, ${b}) references unknown node`);
    }
    into.push(a);
  }
  const ranks = new Map<string, number>();
  const visiting = new Set<string>();
  const rank = (n: string): number => {
    const known = ranks.get(n);
    if (known !== undefined) return known;
    if (visiting.has(n)) throw new Error(`graph is cyclic through '${n}'`);
    visiting.add(n);
    const parents = incoming.get(n)!;
    const r = parents.length === 0 ? 0 : 1 + Math.max(...parents.map(rank));
    visiting.delete(n);
    ranks.set(n, r);
    return r;
  };
  nodes.forEach(rank);
  return ranks;
}

function barycenterSweeps(layers: string[][], edges: [string, string][],
                          sweeps = 3): void {
  const neighborsOf = (forward: boolean) => {
    const map = new Map<string, string[]>();
    for (const [a, b] of edges) {
      const key = forward ? b : a;
      const val = forward ? a : b;
      if (!map.has(key)) map.set(key, []);
      map.get(key)!.push(val);
    }
    return map;
  };
  const preds = neighborsOf(true);
  const succs = neighborsOf(false);
  for (let sweep = 0; sweep < sweeps; sweep++) {
    const forward = sweep % 2 === 0;
    const reference = forward ? preds : succs;
    const indices = [...layers.keys()];
    for (const li of forward ? indices : indices.reverse()) {
      const anchor = new Map<string, number>();
      const anchorLayer = layers[forward ? li - 1 : li + 1];
      if (anchorLayer === undefined) continue;
      anchorLayer.forEach((n, i) => anchor.set(n, i));
      const scores = new Map<string, number>();
      layers[li].forEach((n, i) => {
        const ns = (reference.get(n) ?? []).filter((m) => anchor.has(m));
        scores.set(n, ns.length === 0
          ? i
          : ns.reduce((acc, m) => acc + anchor.get(m)!, 0) / ns.length);
      });
      layers[li].sort((a, b) => scores.get(a)! - scores.get(b)! || a.localeCompare(b));
    }
  }
}

export function layeredLayout(nodes: string[], edges: [string, string][],
                              options: LayoutOptions = DEFAULT_LAYOUT): Map<string, PlacedNode> {
  const ranks = longestPathRanks(nodes, edges);
  const maxRank = Math.max(0, ...ranks.values());
  const layers: string[][] = Array.from({ length: maxRank + 1 }, () => []);
  for (const n of nodes) layers[ranks.get(n)!].push(n);
  barycenterSweeps(layers, edges);
  const placed = new Map<string, PlacedNode>();
  layers.forEach((layer, rank) => {
    layer.forEach((id, order) => {
      placed.set(id, {
        id,
        rank,
        order,
        x: rank * (options.nodeWidth + options.gapX),
        y: order * (options.nodeHeight + options.gapY),
        width: options.nodeWidth,
        height: options.nodeHeight,
      });
    });
  });
  return placed;
}

export function contentBounds(placed: Iterable<PlacedNode>):
  { x: number; y: number; width: number; height: number } {
  let minX = Infinity, minY = Infinity, maxX = -Infinity, maxY = -Infinity;
  for (const node of placed) {
    minX = Math.min(minX, node.x);
    minY = Math.min(minY, node.y);
    maxX = Math.max(maxX, node.x + node.width);
    maxY = Math.max(maxY, node.y + node.height);
  }
  if (minX === Infinity) return { x: 0, y: 0, width: 1, height: 1 };
  return { x: minX, y: minY, width: maxX - minX, height: maxY - minY };
}

/** Stroke width for lineage edges: linear in |relative parameter change|,
 * clamped to [min, max]. */
export function edgeStrokeWidth(relChange: number | null, min = 1.5, max = 8): number {
  if (relChange === null) return min;
  const t = Math.min(1, Math.abs(relChange));
  return min + t * (max - min);
}
