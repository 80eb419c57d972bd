/** API client. Responses racing an newer request for the same slot are
 * discarded: each call takes a sequence number and only the latest one may
 * deliver its result. */

import type {
  BadgeDoc,
  GraphDoc,
  InterestingnessDoc,
  ModelTreeDoc,
  QueryResultDoc,
  SessionDoc,
  ToolDoc,
  WidgetDoc,
  WidgetQueryDoc,
} from './types.js';

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class StaleResponseError extends Error {
  constructor() {
    super('response superseded by a newer request');
  }
}

export class ApiClient {
  private sequence = new Map<string, number>();

  constructor(private base: string,
              private fetchFn: FetchLike = globalThis.fetch?.bind(globalThis) as FetchLike) {
    if (this.base.endsWith('/')) this.base = this.base.slice(0, -1);
  }

  /** Tag a request slot; the returned guard resolves the payload only if no
   * newer request for the slot has started since. */
  private async guarded<T>(slot: string, run: () => Promise<T>): Promise<T> {
    const seq = (this.sequence.get(slot) ?? 0) + 1;
    this.sequence.set(slot, seq);
    const result = await run();
    if (this.sequence.get(slot) !== seq) throw new StaleResponseError();
    return result;
  }

  private async request<T>(path: string, init?: Parameters<FetchLike>[1]): Promise<T> {
    const res = await this.fetchFn(`${this.base}${path}`, init);
    const body = await res.json();
    if (!res.ok) {
      const message = (body as { error?: string }).error ?? `HTTP ${res.status}`;
      throw new Error(message);
    }
    return body as T;
  }

  models(): Promise<string[]> {
    return this.guarded('models', () => this.request('/models'));
  }

  tree(): Promise<ModelTreeDoc> {
    return this.guarded('tree', () => this.request('/experiments/tree'));
  }

  graph(modelId: string): Promise<GraphDoc> {
    return this.guarded(`graph:${modelId}`,
      () => this.request(`/models/${modelId}/graph`));
  }

  info(modelId: string): Promise<Record<string, unknown>> {
    return this.request(`/models/${modelId}/info`);
  }

  search(kind: string): Promise<{ badges: BadgeDoc[] }> {
    return this.guarded('search', () => this.request(`/search?kind=${encodeURIComponent(kind)}`));
  }

  interestingness(measure: string, epoch = 'latest'): Promise<InterestingnessDoc> {
    return this.guarded('interestingness',
      () => this.request(`/interestingness?measure=${measure}&epoch=${epoch}`));
  }

  tools(): Promise<{ tools: ToolDoc[] }> {
    return this.request('/tools');
  }

  applicableTools(uoa: string): Promise<{ tools: ToolDoc[] }> {
    return this.request(`/tools/applicable?uoa=${encodeURIComponent(uoa)}`);
  }

  instantiateWidget(tool: string, uoa: string, classes: number[] | null,
                    epoch: string): Promise<WidgetDoc> {
    return this.request('/widgets/instantiate', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ tool, uoa, classes, epoch }),
    });
  }

  runQuery(query: WidgetQueryDoc): Promise<QueryResultDoc> {
    return this.request('/queries/run', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(query),
    });
  }

  neuronWeightView(modelId: string, layerId: string, k: number,
                   classes: number[], epoch = 'latest'): Promise<Record<string, unknown>> {
    const cls = classes.length > 0 ? `&classes=${classes.join(',')}` : '';
    return this.guarded('nwv', () => this.request(
      `/models/${modelId}/layers/${layerId}/neuron_weight_view?k=${k}&epoch=${epoch}${cls}`));
  }

  neuronsByClass(modelId: string, layerId: string, sortBy: number | null,
                 epoch = 'latest'): Promise<{ rows: { neuron: number; means: number[] }[] }> {
    const sort = sortBy === null ? '' : `&sort_by=${sortBy}`;
    return this.guarded('nxc', () => this.request(
      `/models/${modelId}/layers/${layerId}/neurons_by_class?epoch=${epoch}${sort}`));
  }

  classLabels(): Promise<{ class_labels: string[] }> {
    return this.request('/meta');
  }

  branchModel(modelId: string, name: string): Promise<Record<string, unknown>> {
    return this.request(`/models/${modelId}/branch`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ name }),
    });
  }

  addNote(uoa: string, markdown: string): Promise<Record<string, unknown>> {
    return this.request('/notes', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ uoa, markdown }),
    });
  }

  loadSession(): Promise<SessionDoc> {
    return this.request('/session');
  }

  saveSession(doc: SessionDoc): Promise<unknown> {
    return this.request('/session', {
      method: 'PUT',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(doc),
    });
  }
}
