// Pure table-of-contents editing over the outline tree. Every edit
// produces new ToC text which the caller PUTs back to the service; the
// service's parse is the single source of node identity.

import type { OutlineNodeView } from "./types.js";

export function toTocText(roots: OutlineNodeView[]): string {
  const lines: string[] = [];
  const visit = (node: OutlineNodeView, depth: number) => {
    const marker = node.marker ? `${node.marker} ` : "";
    lines.push(`${"    ".repeat(depth)}${marker}${node.title}`);
    node.children.forEach((child) => visit(child, depth + 1));
  };
  roots.forEach((root) => visit(root, 0));
  return lines.join("\n");
}

function clone(roots: OutlineNodeView[]): OutlineNodeView[] {
  return roots.map((node) => ({ ...node, children: clone(node.children) }));
}

export function findNode(roots: OutlineNodeView[], id: string): OutlineNodeView | null {
  for (const node of roots) {
    if (node.node_id === id) return node;
    const below = findNode(node.children, id);
    if (below) return below;
  }
  return null;
}

export function isDescendant(roots: OutlineNodeView[], ancestorId: string, nodeId: string): boolean {
  const ancestor = findNode(roots, ancestorId);
  if (!ancestor) return false;
  return findNode(ancestor.children, nodeId) !== null;
}

export function renameNode(
  roots: OutlineNodeView[],
  id: string,
  title: string,
): OutlineNodeView[] | null {
  const trimmed = title.trim();
  if (!trimmed || trimmed.includes("\n")) return null;
  const next = clone(roots);
  const node = findNode(next, id);
  if (!node) return null;
  node.title = trimmed;
  return next;
}

export function deleteNode(roots: OutlineNodeView[], id: string): OutlineNodeView[] | null {
  const next = clone(roots);
  const prune = (nodes: OutlineNodeView[]): boolean => {
    const index = nodes.findIndex((n) => n.node_id === id);
    if (index >= 0) {
      nodes.splice(index, 1);
      return true;
    }
    return nodes.some((n) => prune(n.children));
  };
  if (!prune(next)) return null;
  if (next.length === 0) return null; // an outline must keep at least one root
  return next;
}

export function addChild(
  roots: OutlineNodeView[],
  parentId: string | null,
  title: string,
): OutlineNodeView[] | null {
  const trimmed = title.trim();
  if (!trimmed || trimmed.includes("\n")) return null;
  const next = clone(roots);
  const node: OutlineNodeView = {
    node_id: "pending",
    title: trimmed,
    marker: null,
    source_cluster: null,
    children: [],
  };
  if (parentId === null) {
    next.push(node);
    return next;
  }
  const parent = findNode(next, parentId);
  if (!parent) return null;
  parent.children.push(node);
  return next;
}

/**
 * Move a node under a new parent (null = top level) at `index`.
 * Illegal moves return null: unknown ids, moving a node into itself or
 * into one of its own descendants.
 */
export function moveNode(
  roots: OutlineNodeView[],
  id: string,
  newParentId: string | null,
  index: number,
): OutlineNodeView[] | null {
  if (id === newParentId) return null;
  if (newParentId !== null && isDescendant(roots, id, newParentId)) return null;
  if (newParentId !== null && !findNode(roots, newParentId)) return null;
  if (!findNode(roots, id)) return null;

  const next = clone(roots);
  let detached: OutlineNodeView | null = null;
  const detach = (nodes: OutlineNodeView[]): boolean => {
    const at = nodes.findIndex((n) => n.node_id === id);
    if (at >= 0) {
      detached = nodes.splice(at, 1)[0];
      return true;
    }
    return nodes.some((n) => detach(n.children));
  };
  detach(next);
  if (!detached) return null;

  const target = newParentId === null ? next : findNode(next, newParentId)!.children;
  const clamped = Math.max(0, Math.min(index, target.length));
  target.splice(clamped, 0, detached);
  return next;
}

/** Leaf ids in document order; leaves are the generation targets. */
export function leafIds(roots: OutlineNodeView[]): string[] {
  const out: string[] = [];
  const visit = (node: OutlineNodeView) => {
    if (node.children.length === 0) {
      out.push(node.node_id);
    } else {
      node.children.forEach(visit);
    }
  };
  roots.forEach(visit);
  return out;
}
