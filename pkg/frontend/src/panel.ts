/** Widget panel: a vertical accordion with one flap per abstraction level;
 * every widget sits under the flap its unit lives on. */

import type { GroupDoc, WidgetDoc } from './types.js';
import { flapOf, type Flap } from './uoa.js';

export interface PanelModel {
  flaps: Record<Flap, string[]>;
  widgets: Map<string, WidgetDoc>;
  groups: Map<string, GroupDoc>;
}

export function emptyPanel(): PanelModel {
  return {
    flaps: { L3: [], L2: [], L1: [] },
    widgets: new Map(),
    groups: new Map(),
  };
}

export function widgetFlap(widget: WidgetDoc): Flap {
  return flapOf(widget.uoa);
}

export function addWidget(panel: PanelModel, widget: WidgetDoc): PanelModel {
  panel.widgets.set(widget.id, widget);
  panel.flaps[widgetFlap(widget)].push(widget.id);
  return panel;
}

export function removeWidget(panel: PanelModel, widgetId: string): PanelModel {
  const widget = panel.widgets.get(widgetId);
  if (widget === undefined) return panel;
  panel.widgets.delete(widgetId);
  const flap = panel.flaps[widgetFlap(widget)];
  flap.splice(flap.indexOf(widgetId), 1);
  for (const group of panel.groups.values()) {
    const i = group.member_ids.indexOf(widgetId);
    if (i >= 0) group.member_ids.splice(i, 1);
  }
  return panel;
}

/** Drop one widget onto another: join the target's group or form a new one. */
export function dropOnto(panel: PanelModel, draggedId: string,
                         targetId: string): GroupDoc {
  for (const group of panel.groups.values()) {
    if (group.member_ids.includes(targetId)) {
      if (!group.member_ids.includes(draggedId)) group.member_ids.push(draggedId);
      return group;
    }
  }
  const group: GroupDoc = {
    id: `g-${panel.groups.size + 1}`,
    member_ids: [targetId, draggedId],
    mode: 'side_by_side',
  };
  panel.groups.set(group.id, group);
  return group;
}

export function toSessionDoc(panel: PanelModel): {
  widgets: WidgetDoc[]; groups: GroupDoc[]; panel: Record<string, string[]>;
} {
  const order = [...panel.flaps.L3, ...panel.flaps.L2, ...panel.flaps.L1];
  return {
    widgets: order.map((id) => panel.widgets.get(id)!),
    groups: [...panel.groups.values()],
    panel: {
      L3: [...panel.flaps.L3],
      L2: [...panel.flaps.L2],
      L1: [...panel.flaps.L1],
    },
  };
}

export function fromSessionDoc(doc: {
  widgets?: WidgetDoc[]; groups?: GroupDoc[];
}): PanelModel {
  const panel = emptyPanel();
  for (const widget of doc.widgets ?? []) addWidget(panel, widget);
  for (const group of doc.groups ?? []) panel.groups.set(group.id, group);
  return panel;
}
