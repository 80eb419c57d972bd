/** Single-page inspection UI: graph panel over three abstraction levels with
 * minimap, breadcrumbs, toolbox, accordion widget panel, class selector, and
 * localization / interestingness overlays. Talks only to the HTTP API. */

import { ApiClient, StaleResponseError } from './api.js';
import { breadcrumbPath } from './breadcrumbs.js';
import { linkBrushTargets } from './brushing.js';
import {
  contentBounds,
  edgeStrokeWidth,
  layeredLayout,
  type PlacedNode,
} from './layout.js';
import { minimapClickToPan, minimapRect, type Rect } from './minimap.js';
import {
  addWidget,
  emptyPanel,
  fromSessionDoc,
  removeWidget,
  toSessionDoc,
  type PanelModel,
} from './panel.js';
import { Navigation, type Level, type ViewState } from './state.js';
import type {
  GraphDoc,
  ModelTreeDoc,
  QueryResultDoc,
  ToolDoc,
  WidgetDoc,
} from './types.js';
import { flapOf, segmentId } from './uoa.js';
import { decodeViewState, encodeViewState } from './url.js';

const SVG_NS = 'http://www.w3.org/2000/svg';
const COLOR_SCALE = ['#4C78A8', '#F58518', '#54A24B', '#B279A2', '#E45756',
  '#72B7B2', '#EECA3B', '#FF9DA6'];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, cls?: string, text?: string): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function svgEl(tag: string, attrs: Record<string, string | number>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

export class App {
  private api: ApiClient;
  private nav = new Navigation();
  private state: ViewState;
  private panel: PanelModel = emptyPanel();
  private tools: ToolDoc[] = [];
  private classLabels: string[] = [];
  private tree: ModelTreeDoc = { experiments: [] };
  private graphCache = new Map<string, GraphDoc>();
  private placed = new Map<string, PlacedNode>();
  private content: Rect = { x: 0, y: 0, width: 1, height: 1 };
  private badgeCounts = new Map<string, number>();
  private unitColors = new Map<string, string>();
  private widgetData = new Map<string, QueryResultDoc>();

  private graphHost!: HTMLElement;
  private crumbHost!: HTMLElement;
  private minimapHost!: HTMLElement;
  private toolboxHost!: HTMLElement;
  private panelHost!: HTMLElement;
  private classHost!: HTMLElement;

  constructor(private root: HTMLElement, base: string) {
    this.api = new ApiClient(base);
    this.state = decodeViewState(window.location.search, 1200, 800);
  }

  async start(): Promise<void> {
    this.buildChrome();
    const meta = await this.api.classLabels();
    this.classLabels = meta.class_labels;
    if (this.state.classes.length === 0) {
      this.state.classes = this.classLabels.map((_, i) => i);
    }
    this.tree = await this.api.tree();
    this.tools = (await this.api.tools()).tools;
    try {
      this.panel = fromSessionDoc(await this.api.loadSession());
    } catch {
      this.panel = emptyPanel();
    }
    this.renderAll();
  }

  private buildChrome(): void {
    this.root.innerHTML = '';
    const top = el('div', 'topbar');
    this.crumbHost = el('div', 'breadcrumbs');
    top.appendChild(this.crumbHost);
    const main = el('div', 'main');
    const left = el('div', 'sidebar');
    this.toolboxHost = el('div', 'toolbox');
    this.classHost = el('div', 'class-selector');
    this.minimapHost = el('div', 'minimap');
    left.append(this.toolboxHost, this.classHost, this.minimapHost);
    this.graphHost = el('div', 'inspection-panel');
    this.panelHost = el('div', 'widget-panel');
    main.append(left, this.graphHost, this.panelHost);
    this.root.append(top, main);
  }

  // ----- navigation ---------------------------------------------------------

  private setState(next: ViewState): void {
    this.state = next;
    const query = encodeViewState(next);
    window.history.replaceState(null, '', `?${query}`);
    this.renderAll();
  }

  private descendInto(focus: string): void {
    this.setState(this.nav.descend(this.state, focus));
  }

  private ascendTo(level: Level): void {
    this.setState(this.nav.ascendTo(this.state, level));
  }

  // ----- rendering ----------------------------------------------------------

  private renderAll(): void {
    this.renderBreadcrumbs();
    this.renderClassSelector();
    void this.renderGraph().then(() => this.renderMinimap());
    void this.renderToolbox();
    this.renderWidgetPanel();
  }

  private renderBreadcrumbs(): void {
    this.crumbHost.innerHTML = '';
    const model = this.state.focus ? segmentId(this.state.focus, 'model') : null;
    const names = { experiment: this.experimentIdOf(model) ?? 'experiment' };
    for (const crumb of breadcrumbPath(this.state, names)) {
      const button = el('button', 'crumb', crumb.label);
      button.addEventListener('click', () => this.ascendTo(crumb.level));
      this.crumbHost.appendChild(button);
      this.crumbHost.appendChild(el('span', 'crumb-sep', '›'));
    }
  }

  private experimentIdOf(model: string | null): string | null {
    if (model === null) return null;
    for (const exp of this.tree.experiments) {
      if (exp.models.some((m) => m.id === model)) return exp.id;
    }
    return null;
  }

  private async renderGraph(): Promise<void> {
    this.graphHost.innerHTML = '';
    const svg = svgEl('svg', {
      width: this.state.viewport.width,
      height: this.state.viewport.height,
    }) as SVGSVGElement;
    this.graphHost.appendChild(svg);
    const world = svgEl('g', {});
    svg.appendChild(world);
    const vp = this.state.viewport;
    world.setAttribute('transform',
      `scale(${vp.zoom}) translate(${-vp.x}, ${-vp.y})`);
    if (this.state.level === 'L3') this.renderL3(world);
    else if (this.state.level === 'L2') await this.renderL2(world);
    else await this.renderL1(world);
    this.attachPanZoom(svg);
  }

  private renderL3(world: SVGElement): void {
    const nodes: string[] = [];
    const edges: [string, string][] = [];
    for (const exp of this.tree.experiments) {
      for (const m of exp.models) nodes.push(m.id);
      for (const e of exp.edges) edges.push([e.parent, e.child]);
    }
    this.placed = layeredLayout(nodes, edges);
    this.content = contentBounds(this.placed.values());
    for (const exp of this.tree.experiments) {
      for (const e of exp.edges) {
        this.drawEdge(world, e.parent, e.child, edgeStrokeWidth(e.rel_param_change),
          `Δ params ${e.rel_param_change === null ? 'n/a' : e.rel_param_change.toFixed(3)}`);
      }
      for (const m of exp.models) {
        const unit = `model:${m.id}`;
        this.drawNode(world, m.id, `${m.name}\n${m.num_trainable_params} params`,
          COLOR_SCALE[m.color_index % COLOR_SCALE.length], unit,
          () => this.descendInto(unit));
      }
    }
  }

  private async loadGraph(model: string): Promise<GraphDoc> {
    const cached = this.graphCache.get(model);
    if (cached !== undefined) return cached;
    const graph = await this.api.graph(model);
    this.graphCache.set(model, graph);
    return graph;
  }

  private async renderL2(world: SVGElement): Promise<void> {
    const model = segmentId(this.state.focus, 'model');
    if (model === null) return;
    const graph = await this.loadGraph(model);
    const nodes = graph.layers.map((l) => l.id);
    this.placed = layeredLayout(nodes, graph.edges);
    this.content = contentBounds(this.placed.values());
    for (const [a, b] of graph.edges) this.drawEdge(world, a, b, 2, `${a} → ${b}`);
    for (const layer of graph.layers) {
      const unit = `model:${model}/layer:${layer.id}`;
      const ops = layer.inner_ops.map((o) => o.kind).join(' · ');
      this.drawNode(world, layer.id,
        `${layer.name}\n${layer.type} [${layer.output_shape.join('×')}]\n${ops}`,
        '#E8ECF4', unit, () => this.descendInto(unit));
    }
  }

  private async renderL1(world: SVGElement): Promise<void> {
    const model = segmentId(this.state.focus, 'model');
    const layer = segmentId(this.state.focus, 'layer');
    if (model === null || layer === null) return;
    let view: Record<string, unknown>;
    try {
      view = await this.api.neuronWeightView(model, layer, 12, this.state.classes);
    } catch (err) {
      if (err instanceof StaleResponseError) return;
      this.graphHost.appendChild(el('div', 'error', String(err)));
      return;
    }
    const sources = view.source_neurons as { index: number; mean_activation: number }[];
    const targets = view.target_neurons as { index: number; mean_activation: number }[];
    const edges = view.edges as [number, number, number][];
    const gap = 44;
    const place = (list: { index: number }[], x: number) => {
      const map = new Map<number, number>();
      list.forEach((n, i) => map.set(n.index, i * gap));
      return { x, map };
    };
    const src = place(sources, 60);
    const tgt = place(targets, 420);
    const acts = [...sources, ...targets].map((n) => n.mean_activation);
    const lo = Math.min(...acts);
    const hi = Math.max(...acts);
    const heat = (v: number) => {
      const t = hi > lo ? (v - lo) / (hi - lo) : 0;
      const mix = (a: number, b: number) => Math.round(a + t * (b - a));
      return `rgb(${mix(59, 180)}, ${mix(76, 4)}, ${mix(192, 38)})`;
    };
    for (const [si, ti, value] of edges) {
      const y1 = src.map.get(si);
      const y2 = tgt.map.get(ti);
      if (y1 === undefined || y2 === undefined) continue;
      world.appendChild(svgEl('line', {
        x1: src.x, y1, x2: tgt.x, y2,
        stroke: value >= 0 ? '#666' : '#C66',
        'stroke-width': Math.max(0.5, Math.min(6, Math.abs(value) * 6)),
      }));
    }
    const drawSide = (list: { index: number; mean_activation: number }[],
                      at: { x: number; map: Map<number, number> }, prefix: string) => {
      for (const neuron of list) {
        const y = at.map.get(neuron.index)!;
        const circle = svgEl('circle', {
          cx: at.x, cy: y, r: 12, fill: heat(neuron.mean_activation),
          stroke: '#333',
        });
        circle.appendChild(svgEl('title', {})).textContent =
          `${prefix} ${neuron.index}: mean ${neuron.mean_activation.toFixed(4)}`;
        world.appendChild(circle);
        const label = svgEl('text', {
          x: at.x + 16, y: y + 4, 'font-size': 10,
        });
        label.textContent = String(neuron.index);
        world.appendChild(label);
      }
    };
    drawSide(sources, src, String(view.source_layer));
    drawSide(targets, tgt, layer);
    const count = Math.max(sources.length, targets.length);
    this.content = { x: 0, y: -20, width: 500, height: Math.max(1, count * gap + 40) };
    this.placed = new Map();
  }

  private drawNode(world: SVGElement, id: string, label: string, fill: string,
                   unit: string, onDescend: () => void): void {
    const node = this.placed.get(id);
    if (node === undefined) return;
    const group = svgEl('g', { class: 'node' });
    const color = this.unitColorFor(unit) ?? fill;
    group.appendChild(svgEl('rect', {
      x: node.x, y: node.y, width: node.width, height: node.height,
      rx: 6, fill: color, stroke: '#30343B', 'stroke-width': 1.2,
    }));
    label.split('\n').forEach((line, i) => {
      const text = svgEl('text', {
        x: node.x + 8, y: node.y + 16 + i * 13, 'font-size': 10.5,
      });
      text.textContent = line;
      group.appendChild(text);
    });
    const badge = this.badgeCounts.get(unit);
    if (this.state.showBadges && badge !== undefined) {
      group.appendChild(svgEl('circle', {
        cx: node.x + node.width - 6, cy: node.y + 4, r: 9, fill: '#E45756',
      }));
      const count = svgEl('text', {
        x: node.x + node.width - 6, y: node.y + 8, 'font-size': 9,
        'text-anchor': 'middle', fill: '#fff',
      });
      count.textContent = String(badge);
      group.appendChild(count);
    }
    group.addEventListener('dblclick', onDescend);
    group.addEventListener('click', () => void this.applyActiveTool(unit));
    group.addEventListener('mouseenter', () => this.brush(unit, true));
    group.addEventListener('mouseleave', () => this.brush(unit, false));
    world.appendChild(group);
  }

  private drawEdge(world: SVGElement, a: string, b: string, width: number,
                   tooltip: string): void {
    const from = this.placed.get(a);
    const to = this.placed.get(b);
    if (from === undefined || to === undefined) return;
    const line = svgEl('line', {
      x1: from.x + from.width, y1: from.y + from.height / 2,
      x2: to.x, y2: to.y + to.height / 2,
      stroke: '#9AA3AF', 'stroke-width': width,
    });
    line.appendChild(svgEl('title', {})).textContent = tooltip;
    world.appendChild(line);
  }

  private unitColorFor(unit: string): string | null {
    return this.state.showInterestingness
      ? this.unitColors.get(unit) ?? null
      : null;
  }

  private attachPanZoom(svg: SVGSVGElement): void {
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    svg.addEventListener('mousedown', (e) => {
      dragging = true;
      lastX = e.clientX;
      lastY = e.clientY;
    });
    svg.addEventListener('mouseup', () => { dragging = false; });
    svg.addEventListener('mousemove', (e) => {
      if (!dragging) return;
      const vp = this.state.viewport;
      vp.x -= (e.clientX - lastX) / vp.zoom;
      vp.y -= (e.clientY - lastY) / vp.zoom;
      lastX = e.clientX;
      lastY = e.clientY;
      void this.renderGraph().then(() => this.renderMinimap());
    });
    svg.addEventListener('wheel', (e) => {
      e.preventDefault();
      const vp = this.state.viewport;
      vp.zoom = Math.min(4, Math.max(0.2, vp.zoom * (e.deltaY < 0 ? 1.15 : 0.87)));
      void this.renderGraph().then(() => this.renderMinimap());
    });
  }

  private renderMinimap(): void {
    this.minimapHost.innerHTML = '';
    const mapW = 180;
    const mapH = 120;
    const svg = svgEl('svg', { width: mapW, height: mapH, class: 'minimap-svg' });
    svg.appendChild(svgEl('rect', {
      x: 0, y: 0, width: mapW, height: mapH, fill: '#F2F4F8', stroke: '#C8CDD6',
    }));
    const rect = minimapRect(this.content, this.state.viewport, mapW, mapH);
    svg.appendChild(svgEl('rect', {
      x: rect.x, y: rect.y, width: rect.width, height: rect.height,
      fill: 'rgba(76,120,168,0.25)', stroke: '#4C78A8',
    }));
    svg.addEventListener('click', (e) => {
      const bounds = (svg as unknown as SVGSVGElement).getBoundingClientRect();
      const click = { x: e.clientX - bounds.left, y: e.clientY - bounds.top };
      const pan = minimapClickToPan(this.content, click, this.state.viewport, mapW, mapH);
      this.state.viewport.x = pan.x;
      this.state.viewport.y = pan.y;
      void this.renderGraph().then(() => this.renderMinimap());
    });
    this.minimapHost.appendChild(svg);
  }

  private async renderToolbox(): Promise<void> {
    this.toolboxHost.innerHTML = '';
    this.toolboxHost.appendChild(el('h3', undefined, 'Toolbox'));
    for (const tool of this.tools) {
      const button = el('button', 'tool', tool.name);
      button.title = tool.description;
      if (this.state.activeTool === tool.id) button.classList.add('active');
      button.addEventListener('click', () => {
        this.state.activeTool = this.state.activeTool === tool.id ? null : tool.id;
        void this.renderToolbox();
      });
      this.toolboxHost.appendChild(button);
    }
    const toggles = el('div', 'overlay-toggles');
    const badgeToggle = el('button', 'toggle', 'Badges: conv');
    badgeToggle.addEventListener('click', () => void this.toggleBadges('conv'));
    const interestToggle = el('button', 'toggle', 'Interestingness: skew');
    interestToggle.addEventListener('click', () => void this.toggleInterestingness('skew'));
    toggles.append(badgeToggle, interestToggle);
    this.toolboxHost.appendChild(toggles);
  }

  private async toggleBadges(kind: string): Promise<void> {
    this.state.showBadges = !this.state.showBadges;
    this.badgeCounts.clear();
    if (this.state.showBadges) {
      const res = await this.api.search(kind);
      for (const badge of res.badges) this.badgeCounts.set(badge.uoa, badge.count);
    }
    this.renderAll();
  }

  private async toggleInterestingness(measure: string): Promise<void> {
    this.state.showInterestingness = !this.state.showInterestingness;
    this.unitColors.clear();
    if (this.state.showInterestingness) {
      const res = await this.api.interestingness(measure, this.state.epoch);
      for (const [unit, color] of Object.entries(res.colors)) {
        this.unitColors.set(unit, color);
      }
    }
    this.renderAll();
  }

  private async applyActiveTool(unit: string): Promise<void> {
    if (this.state.activeTool === null) return;
    const tool = this.state.activeTool;
    this.state.activeTool = null; // a tool stays active until applied
    try {
      const widget = await this.api.instantiateWidget(
        tool, unit, this.state.classes, this.state.epoch);
      addWidget(this.panel, widget);
      if (widget.query !== null) {
        this.widgetData.set(widget.id, await this.api.runQuery(widget.query));
      }
      await this.api.saveSession(toSessionDoc(this.panel));
    } catch (err) {
      console.error(err);
    }
    this.renderAll();
  }

  private renderClassSelector(): void {
    this.classHost.innerHTML = '';
    this.classHost.appendChild(el('h3', undefined, 'Classes'));
    this.classLabels.forEach((label, i) => {
      const row = el('label', 'class-row');
      const box = el('input') as HTMLInputElement;
      box.type = 'checkbox';
      box.checked = this.state.classes.includes(i);
      box.addEventListener('change', () => {
        const selected = this.state.classes.includes(i)
          ? this.state.classes.filter((c) => c !== i)
          : [...this.state.classes, i].sort((a, b) => a - b);
        if (selected.length === 0) return; // the selection stays non-empty
        this.state.classes = selected;
        void this.requeryClassDependentWidgets();
      });
      row.append(box, el('span', undefined, label));
      this.classHost.appendChild(row);
    });
  }

  private async requeryClassDependentWidgets(): Promise<void> {
    for (const widget of this.panel.widgets.values()) {
      if (widget.class_warning || widget.query === null) continue;
      if (widget.query.source === 'checkpoint') {
        widget.query = { ...widget.query, classes: this.state.classes };
        try {
          this.widgetData.set(widget.id, await this.api.runQuery(widget.query));
        } catch (err) {
          if (!(err instanceof StaleResponseError)) console.error(err);
        }
      }
    }
    this.renderAll();
  }

  private renderWidgetPanel(): void {
    this.panelHost.innerHTML = '';
    this.panelHost.appendChild(el('h3', undefined, 'Widgets'));
    for (const flap of ['L3', 'L2', 'L1'] as const) {
      const section = el('details', 'flap');
      (section as HTMLDetailsElement).open = flap === this.state.level;
      section.appendChild(el('summary', undefined, flap));
      for (const widgetId of this.panel.flaps[flap]) {
        const widget = this.panel.widgets.get(widgetId);
        if (widget !== undefined) section.appendChild(this.widgetCard(widget));
      }
      this.panelHost.appendChild(section);
    }
  }

  private widgetCard(widget: WidgetDoc): HTMLElement {
    const card = el('div', 'widget');
    card.dataset.widgetId = widget.id;
    const header = el('div', 'widget-header');
    const title = widget.class_warning
      ? `${widget.tool_id} ⚠` : widget.tool_id;
    header.appendChild(el('span', 'widget-title', title));
    header.title = widget.uoa;
    const jump = el('button', 'jump', '↗');
    jump.title = 'jump to the unit this widget belongs to';
    jump.addEventListener('click', () => this.jumpTo(widget));
    const close = el('button', 'close', '×');
    close.addEventListener('click', () => {
      removeWidget(this.panel, widget.id);
      void this.api.saveSession(toSessionDoc(this.panel));
      this.renderWidgetPanel();
    });
    header.append(jump, close);
    card.appendChild(header);
    card.appendChild(el('div', 'widget-uoa', widget.uoa));
    const body = el('div', 'widget-body');
    const data = this.widgetData.get(widget.id);
    if (data !== undefined) body.appendChild(this.renderResult(data));
    else if (widget.action !== null) body.appendChild(el('em', undefined, widget.action));
    card.appendChild(body);
    card.addEventListener('mouseenter', () => this.brush(widget.uoa, true));
    card.addEventListener('mouseleave', () => this.brush(widget.uoa, false));
    return card;
  }

  private jumpTo(widget: WidgetDoc): void {
    const flap = flapOf(widget.uoa);
    const level: Level = flap;
    this.setState({
      ...this.state,
      level,
      focus: flap === 'L3' ? '' : widget.uoa,
    });
  }

  private renderResult(doc: QueryResultDoc): HTMLElement {
    if (doc.type === 'scalar') return el('div', 'scalar', doc.value.toPrecision(6));
    if (doc.type === 'tensor') {
      return el('div', 'tensor',
        `[${doc.shape.join('×')}] ${doc.values.slice(0, 8).map((v) => v.toPrecision(3)).join(', ')}…`);
    }
    if (doc.type === 'epoch_series') {
      const host = el('div', 'series');
      doc.epochs.forEach((epoch, i) => {
        const sub = el('div', 'series-entry');
        sub.appendChild(el('span', 'epoch-label', `epoch ${epoch}: `));
        sub.appendChild(this.renderResult(doc.results[i]));
        host.appendChild(sub);
      });
      return host;
    }
    // table: render numeric columns as a sparkline list
    const host = el('div', 'table');
    for (const [name, values] of Object.entries(doc.columns)) {
      const row = el('div', 'column');
      row.appendChild(el('span', 'column-name', name));
      row.appendChild(this.sparkline(values));
      host.appendChild(row);
    }
    return host;
  }

  private sparkline(values: number[]): HTMLElement {
    const width = 160;
    const height = 28;
    const svg = svgEl('svg', { width, height });
    if (values.length > 0) {
      const lo = Math.min(...values);
      const hi = Math.max(...values);
      const pts = values.map((v, i) => {
        const x = values.length === 1 ? width / 2 : (i / (values.length - 1)) * width;
        const y = hi > lo ? height - ((v - lo) / (hi - lo)) * (height - 4) - 2 : height / 2;
        return `${x.toFixed(1)},${y.toFixed(1)}`;
      });
      svg.appendChild(svgEl('polyline', {
        points: pts.join(' '), fill: 'none', stroke: '#4C78A8', 'stroke-width': 1.4,
      }));
    }
    const wrap = el('span', 'spark');
    wrap.appendChild(svg as unknown as Node);
    return wrap;
  }

  private brush(unit: string, on: boolean): void {
    const result = linkBrushTargets({ kind: 'uoa', id: unit },
      this.panel.widgets.values());
    for (const card of this.panelHost.querySelectorAll<HTMLElement>('.widget')) {
      const id = card.dataset.widgetId ?? '';
      card.classList.toggle('highlight', on && result.widgetIds.has(id));
    }
  }
}

export function mount(selector: string, apiBase: string): void {
  const host = document.querySelector<HTMLElement>(selector);
  if (host === null) throw new Error(`no element matches ${selector}`);
  void new App(host, apiBase).start();
}
