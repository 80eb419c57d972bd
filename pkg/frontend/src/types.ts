/** Document shapes served by the modelprobe API. */

export interface TreeModel {
  id: string;
  name: string;
  color_index: number;
  depth: number;
  num_trainable_params: number;
}

export interface TreeEdge {
  parent: string;
  child: string;
  rel_param_change: number | null;
}

export interface ExperimentDoc {
  id: string;
  models: TreeModel[];
  edges: TreeEdge[];
}

export interface ModelTreeDoc {
  experiments: ExperimentDoc[];
}

export interface InnerOpDoc {
  id: string;
  kind: string;
  attrs: Record<string, unknown>;
}

export interface LayerDoc {
  id: string;
  name: string;
  type: string;
  output_shape: number[];
  inner_ops: InnerOpDoc[];
  inner_edges: [string, string][];
}

export interface GraphDoc {
  layers: LayerDoc[];
  edges: [string, string][];
}

export interface BadgeDoc {
  uoa: string;
  match_kind: string;
  count: number;
}

export interface InterestingnessDoc {
  measure: { kind: string; baseline?: string };
  normalized: Record<string, number>;
  propagated: Record<string, number>;
  colors: Record<string, string>;
}

export interface ToolDoc {
  id: string;
  name: string;
  description: string;
  category: string;
  applicable_uoa_kinds: string[];
  applicable_levels: string[];
  produces: string;
  class_recomputable: boolean;
  functional: boolean;
}

export interface WidgetQueryDoc {
  models: string[];
  source: string;
  epoch: string | number;
  path: string;
  transform: Record<string, unknown>[];
  classes: number[] | null;
}

export interface WidgetDoc {
  id: string;
  tool_id: string;
  uoa: string;
  level: string;
  representation: string;
  class_warning: boolean;
  query: WidgetQueryDoc | null;
  action: string | null;
}

export interface GroupDoc {
  id: string;
  member_ids: string[];
  mode: 'side_by_side' | 'common_scale' | 'merged';
}

export interface SessionDoc {
  widgets: WidgetDoc[];
  groups: GroupDoc[];
  panel: Record<string, string[]>;
}

export type QueryResultDoc =
  | { type: 'scalar'; value: number; epoch?: number }
  | { type: 'tensor'; shape: number[]; values: number[]; epoch?: number }
  | { type: 'table'; columns: Record<string, number[]>; epoch?: number }
  | { type: 'epoch_series'; epochs: number[]; results: QueryResultDoc[] };
