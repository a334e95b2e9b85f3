import { describe, expect, it } from "vitest";

import { ApiClient, ServiceError } from "../src/client.js";
import { makeMockService } from "./mockService.js";

describe("ApiClient", () => {
  it("reads health and attributes", async () => {
    const { fetch } = makeMockService();
    const client = new ApiClient("http://svc", fetch);
    expect(await client.health()).toEqual({
      status: "ok",
      model_id: "mock-sentiment",
    });
    const attrs = await client.attributes();
    expect(attrs.attribute).toBe("sentiment");
    expect(attrs.values).toEqual(["negative", "neutral", "positive"]);
  });

  it("posts suggestion requests as JSON", async () => {
    const { fetch, requests } = makeMockService();
    const client = new ApiClient("http://svc", fetch);
    const res = await client.suggest({
      context: ["the dog ran home."],
      value: "positive",
      n: 3,
    });
    expect(res.suggestions).toHaveLength(3);
    expect(requests[0].body.context).toEqual(["the dog ran home."]);
    expect(requests[0].body.value).toBe("positive");
  });

  it("turns error payloads into ServiceError with code and status", async () => {
    const { fetch } = makeMockService({ failNext: () => true });
    const client = new ApiClient("http://svc", fetch);
    const err = await client.health().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect((err as ServiceError).status).toBe(503);
    expect((err as ServiceError).code).toBe("unavailable");
  });
});
