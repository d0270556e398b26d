/**
 * Drag-to-reorder for ranking lists. The list math is a pure function so it
 * can be tested without a DOM; the DragToReorder class only wires pointer
 * events to it and reports the final order through a callback.
 */

/** Return a copy of the list with one item moved; out-of-range is a no-op. */
export function moveItem<T>(items: T[], from: number, to: number): T[] {
  if (from < 0 || from >= items.length || to < 0 || to >= items.length || from === to) {
    return [...items];
  }
  const next = [...items];
  const moved = next.splice(from, 1)[0] as T;
  next.splice(to, 0, moved);
  return next;
}

export interface ReorderCallbacks {
  /** Fired after a completed drop with the new order of data-product ids. */
  onReorder: (orderedIds: string[]) => void;
}

export class DragToReorder {
  private dragIndex = -1;

  constructor(
    private readonly list: HTMLElement,
    private readonly callbacks: ReorderCallbacks,
  ) {
    this.list.addEventListener('dragstart', this.handleDragStart);
    this.list.addEventListener('dragover', this.handleDragOver);
    this.list.addEventListener('drop', this.handleDrop);
    this.list.addEventListener('dragend', this.handleDragEnd);
  }

  detach(): void {
    this.list.removeEventListener('dragstart', this.handleDragStart);
    this.list.removeEventListener('dragover', this.handleDragOver);
    this.list.removeEventListener('drop', this.handleDrop);
    this.list.removeEventListener('dragend', this.handleDragEnd);
  }

  private items(): HTMLElement[] {
    return Array.from(this.list.querySelectorAll<HTMLElement>('[data-product]'));
  }

  private indexOfTarget(target: EventTarget | null): number {
    if (!(target instanceof Element)) {
      return -1;
    }
    const item = target.closest<HTMLElement>('[data-product]');
    return item ? this.items().indexOf(item) : -1;
  }

  private handleDragStart = (event: DragEvent): void => {
    this.dragIndex = this.indexOfTarget(event.target);
    if (this.dragIndex >= 0 && event.dataTransfer) {
      event.dataTransfer.effectAllowed = 'move';
      event.dataTransfer.setData('text/plain', String(this.dragIndex));
    }
  };

  private handleDragOver = (event: DragEvent): void => {
    if (this.dragIndex >= 0) {
      event.preventDefault();
      if (event.dataTransfer) {
        event.dataTransfer.dropEffect = 'move';
      }
    }
  };

  private handleDrop = (event: DragEvent): void => {
    event.preventDefault();
    const dropIndex = this.indexOfTarget(event.target);
    if (this.dragIndex < 0 || dropIndex < 0) {
      return;
    }
    const ids = this.items().map((item) => item.dataset['product'] ?? '');
    this.callbacks.onReorder(moveItem(ids, this.dragIndex, dropIndex));
    this.dragIndex = -1;
  };

  private handleDragEnd = (): void => {
    this.dragIndex = -1;
  };
}
