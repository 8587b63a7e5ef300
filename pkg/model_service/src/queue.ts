// One inference worker per device.  A request either takes the worker,
// parks in the device's bounded wait queue, or is refused outright; the
// refusal surfaces as HTTP 429 upstream.

export class Saturated extends Error {
  constructor(device: string) {
    super(`device ${device} is saturated`);
  }
}

class DeviceWorker {
  private busy = false;
  private waiters: Array<() => void> = [];

  constructor(
    readonly device: string,
    private readonly maxQueue: number,
  ) {}

  async acquire(): Promise<void> {
    if (!this.busy) {
      this.busy = true;
      return;
    }
    if (this.waiters.length >= this.maxQueue) {
      throw new Saturated(this.device);
    }
    await new Promise<void>((resolve) => this.waiters.push(resolve));
  }

  release(): void {
    const next = this.waiters.shift();
    if (next) {
      next(); // hand the worker straight to the next in line
    } else {
      this.busy = false;
    }
  }

  get depth(): number {
    return this.waiters.length + (this.busy ? 1 : 0);
  }
}

export class WorkerPool {
  private workers = new Map<string, DeviceWorker>();

  constructor(private readonly maxQueue: number) {}

  private worker(device: string): DeviceWorker {
    let w = this.workers.get(device);
    if (!w) {
      w = new DeviceWorker(device, this.maxQueue);
      this.workers.set(device, w);
    }
    return w;
  }

  async withDevice<T>(device: string, job: () => Promise<T>): Promise<T> {
    const w = this.worker(device);
    await w.acquire();
    try {
      return await job();
    } finally {
      w.release();
    }
  }

  depth(device: string): number {
    return this.workers.get(device)?.depth ?? 0;
  }
}
