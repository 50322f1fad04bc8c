// Client runtime shim. The worker is started from the bundle URL, so the
// task manager origin is the worker's own origin.
(function (scope) {
  const origin = new URL(scope.location.href).origin;
  let session = null;

  async function post(path, message) {
    const query = session ? "?session=" + encodeURIComponent(session) : "";
    const res = await fetch(origin + path + query, {
      method: "POST",
      headers: { "Content-Type": "text/plain" },
      body: JSON.stringify(message),
    });
    if (!res.ok) throw new Error("task manager replied " + res.status);
    return res.json();
  }

  function sleep(ms) {
    return new Promise((resolve) => setTimeout(resolve, ms));
  }

  function makeApi(current) {
    let sequence = current.checkpoint ? current.checkpoint.sequence : 0;
    return {
      assignNextTask: (count) => post("/api/tasks", { type: "request_tasks", count: count || 1 }),
      checkpointTask: (progressUnits) => {
        sequence += 1;
        return post("/api/partial", {
          type: "partial",
          task_id: current.task_id,
          sequence: sequence,
          progress_units: progressUnits,
          partial_payload: current.payload,
        });
      },
      nextSequence: () => sequence + 1,
    };
  }

  async function loop(kernelId, kernel) {
    const welcome = await post("/api/hello", { type: "hello", client_info: { kernel: kernelId } });
    session = welcome.session;
    for (;;) {
      const reply = await post("/api/tasks", { type: "request_tasks", count: 1 });
      if (reply.type === "drained") return;
      for (const current of reply.tasks) {
        const api = makeApi(current);
        await kernel(current.payload, api);
        await post("/api/final", {
          type: "final",
          task_id: current.task_id,
          sequence: api.nextSequence(),
          payload: current.payload,
        });
      }
    }
  }

  scope.webswarm = {
    start: async (kernelId, kernel) => {
      let backoff = 500;
      for (;;) {
        try {
          await loop(kernelId, kernel);
          return;
        } catch (e) {
          session = null;
          await sleep(backoff);
          backoff = Math.min(backoff * 2, 30000);
        }
      }
    },
  };
})(self);
