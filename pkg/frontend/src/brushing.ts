/** Linking and brushing: hovering a unit highlights all widgets bound to it
 * or its descendants (and vice versa); hovering a rendered sample highlights
 * that sample in every widget that shows per-sample data. */

import type { WidgetDoc } from './types.js';
import { isAncestor } from './uoa.js';

export interface BrushTarget {
  kind: 'uoa' | 'sample';
  id: string;
}

export interface HighlightSet {
  widgetIds: Set<string>;
  backboneUnits: Set<string>;
  sampleId: string | null;
}

/** Representations whose marks are addressable by dataset sample. */
const SAMPLE_LINKED = new Set(['image_grid', 'scatter']);

export function linkBrushTargets(hover: BrushTarget,
                                 widgets: Iterable<WidgetDoc>): HighlightSet {
  const widgetIds = new Set<string>();
  const backboneUnits = new Set<string>();
  let sampleId: string | null = null;
  if (hover.kind === 'uoa') {
    backboneUnits.add(hover.id);
    for (const widget of widgets) {
      if (widget.uoa === hover.id || isAncestor(hover.id, widget.uoa)) {
        widgetIds.add(widget.id);
      }
    }
  } else {
    sampleId = hover.id;
    for (const widget of widgets) {
      if (SAMPLE_LINKED.has(widget.representation)) {
        widgetIds.add(widget.id);
      }
    }
  }
  return { widgetIds, backboneUnits, sampleId };
}

/** Hovering a widget header highlights the backbone unit it belongs to; the
 * jump button navigates there. */
export function widgetHoverTarget(widget: WidgetDoc): string {
  return widget.uoa;
}
