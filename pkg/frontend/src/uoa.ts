/** Unit paths: `kind:id` segments joined by `/`, in strictly descending
 * hierarchy order (experiment > model > layer > op > variable > neuron >
 * weight). The canonical strings are shared with the API. */

export type UnitKind =
  | 'experiment' | 'model' | 'layer' | 'op' | 'variable' | 'neuron' | 'weight';

export interface Segment {
  kind: UnitKind;
  id: string;
}

const RANKS: Record<UnitKind, number> = {
  experiment: 0, model: 1, layer: 2, op: 3, variable: 4, neuron: 5, weight: 6,
};

export type Flap = 'L3' | 'L2' | 'L1';

/** The abstraction level a unit lives on (and its widget-panel flap). */
export function flapOf(path: string): Flap {
  const kind = parseUnitPath(path)[parseUnitPath(path).length - 1].kind;
  if (kind === 'experiment' || kind === 'model') return 'L3';
  if (kind === 'neuron' || kind === 'weight') return 'L1';
  return 'L2';
}

export function parseUnitPath(text: string): Segment[] {
  if (!text) throw new Error('empty unit path');
  const segments: Segment[] = [];
  let lastRank = -1;
  for (const part of text.split('/')) {
    const idx = part.indexOf(':');
    if (idx <= 0 || idx === part.length - 1) {
      throw new Error(`malformed segment '${part}' in '${text}'`);
    }
    const kind = part.slice(0, idx) as UnitKind;
    if (!(kind in RANKS)) throw new Error(`unknown segment kind '${kind}'`);
    const rank = RANKS[kind];
    if (rank <= lastRank) {
      throw new Error(`segment '${part}' out of hierarchy order`);
    }
    lastRank = rank;
    segments.push({ kind, id: part.slice(idx + 1) });
  }
  return segments;
}

export function formatUnitPath(segments: Segment[]): string {
  return segments.map((s) => `${s.kind}:${s.id}`).join('/');
}

export function segmentId(path: string, kind: UnitKind): string | null {
  for (const segment of parseUnitPath(path)) {
    if (segment.kind === kind) return segment.id;
  }
  return null;
}

/** True when `ancestor` is a strict prefix of `descendant` on segment
 * boundaries. */
export function isAncestor(ancestor: string, descendant: string): boolean {
  return descendant.length > ancestor.length
    && descendant.startsWith(ancestor)
    && descendant[ancestor.length] === '/';
}
