import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { LabelingController } from "../src/controller.js";
import { FakeService, relevanceTask } from "./fake_service.js";

function setup(taskCount = 10) {
  const tasks = Array.from({ length: taskCount },
    (_, i) => relevanceTask(i, `p${i}`));
  const service = new FakeService(tasks);
  const api = new ApiClient("http://fake", service.fetch);
  const controller = new LabelingController(api, "ann1");
  return { service, controller };
}

describe("keyboard-only labeling", () => {
  it("labels a 10-task queue end to end through the API", async () => {
    const { service, controller } = setup(10);
    await controller.start();

    const plannedVerdicts: string[] = [];
    while (controller.state.phase === "labeling") {
      const verdict = String(controller.state.task!.index % 4);
      plannedVerdicts.push(verdict);
      await controller.handleKey(verdict);
      await controller.handleKey("Enter");
    }

    expect(controller.state.phase).toBe("done");
    expect(service.labels.size).toBe(10);
    // every label round-trips: the server holds exactly what was keyed in
    for (let i = 0; i < 10; i++) {
      const stored = service.labels.get(
        `relevance:passage:t1:p${i}␟ann1`);
      expect(stored?.verdict).toBe(plannedVerdicts[i]);
    }
    expect(controller.state.progress["relevance"])
      .toEqual({ labeled: 10, total: 10 });
    expect(controller.state.pendingQueue).toHaveLength(0);
  });

  it("Enter alone never submits", async () => {
    const { service, controller } = setup(2);
    await controller.start();
    await controller.handleKey("Enter");
    await controller.handleKey("Enter");
    expect(service.labels.size).toBe(0);
    expect(controller.state.task?.index).toBe(0);
  });
});

describe("optimistic submit with retry queue", () => {
  it("queues labels while offline and flushes on reconnect", async () => {
    const { service, controller } = setup(3);
    await controller.start();

    service.networkDown = true;
    await controller.handleKey("2");
    await controller.handleKey("Enter");
    expect(controller.state.offline).toBe(true);
    expect(controller.state.pendingQueue).toHaveLength(1);
    expect(service.labels.size).toBe(0);

    service.networkDown = false;
    await controller.flushQueue();
    await controller.loadNext();
    expect(service.labels.size).toBe(1);
    expect(controller.state.pendingQueue).toHaveLength(0);
    expect(controller.state.offline).toBe(false);
    expect(controller.state.task?.index).toBe(1);
  });

  it("a rejected label surfaces inline without losing the view", async () => {
    const { service, controller } = setup(2);
    await controller.start();
    // sabotage: server stops accepting this task's verdicts
    service.tasks[0]!.allowed = ["0"];
    await controller.handleKey("3");
    await controller.handleKey("Enter");
    expect(controller.state.inlineError).toContain("422");
    expect(service.labels.size).toBe(0);
    expect(controller.state.task).not.toBeNull();
  });
});
