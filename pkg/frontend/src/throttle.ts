/** Trailing throttle: at most one flush per interval, latest payload wins.
 *
 * Slider scrubs push continuously; the wrapped action fires on the next
 * interval boundary with whatever value is pending there, so a motion of
 * duration D produces at most ceil(D / interval) calls.
 */
export class TrailingThrottle {
  private pending: (() => void) | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(private readonly intervalMs: number) {}

  push(action: () => void): void {
    this.pending = action;
    if (this.timer === null) {
      this.timer = setTimeout(() => this.flush(), this.intervalMs);
    }
  }

  /** Drop whatever is pending (used by reset so stale motion never fires). */
  cancel(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.pending = null;
  }

  private flush(): void {
    this.timer = null;
    const action = this.pending;
    this.pending = null;
    if (action) action();
  }
}
