/**
 * Network interception audit: drive the whole UI against the recorded
 * service, then prove every numeric token in the rendered DOM is the
 * verbatim or formatted image of a value (or string) the service
 * actually returned. The UI computes presentation only, never numbers.
 */

import { describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";
import { fmt } from "../src/format.js";
import { fakeService } from "./fakeService.js";

const NUMERIC = /-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?/g;

/** every numeric token derivable from a served payload */
function servedTokens(payloads: unknown[]): Set<string> {
  const tokens = new Set<string>();
  const visit = (value: unknown): void => {
    if (typeof value === "number") {
      tokens.add(String(value));
      tokens.add(fmt(value));
    } else if (typeof value === "string") {
      for (const hit of value.match(NUMERIC) ?? []) tokens.add(hit);
    } else if (Array.isArray(value)) {
      for (const item of value) visit(item);
    } else if (value !== null && typeof value === "object") {
      for (const [key, item] of Object.entries(value)) {
        visit(key);
        visit(item);
      }
    }
  };
  for (const payload of payloads) visit(payload);
  return tokens;
}

/** numeric tokens in rendered text, with a context snippet each */
function domTokens(root: Node): { token: string; context: string }[] {
  const out: { token: string; context: string }[] = [];
  const walker = document.createTreeWalker(root, NodeFilter.SHOW_TEXT);
  while (walker.nextNode()) {
    const text = walker.currentNode.nodeValue ?? "";
    for (const hit of text.match(NUMERIC) ?? []) {
      out.push({ token: hit, context: text.trim().slice(0, 70) });
    }
  }
  return out;
}

describe("all displayed numbers originate from service responses", () => {
  it("finds no numeric token in the DOM that the service never sent", async () => {
    document.body.innerHTML = "";
    const root = document.createElement("div");
    document.body.appendChild(root);
    const svc = fakeService();
    const app = new App(root, new ApiClient("", svc.fetcher));
    await app.boot();

    // configuration screen: assignment, VIF badges, matrix, legend
    const assign = (name: string, role: string) =>
      root
        .querySelector<HTMLButtonElement>(
          `[data-variable="${name}"] button[data-assign="${role}"]`,
        )
        ?.click();
    assign("y", "dependent");
    assign("x1", "independent");
    assign("x2", "independent");
    await app.settle();

    // train a model end to end (poll until the job converges)
    await app.train();
    await app.settle();

    // analysis screen: surface narrative, every indicator layer, hover
    root.querySelector<HTMLButtonElement>('nav [data-screen="analysis"]')?.click();
    await app.settle();
    root
      .querySelector<HTMLElement>('.surface-row[data-surface="x2"]')
      ?.click();
    await app.settle();
    for (const row of root.querySelectorAll<HTMLElement>(".indicator-row")) {
      row.click();
      await app.settle();
    }
    for (const button of root.querySelectorAll<HTMLButtonElement>(".explain")) {
      button.click();
    }
    const paragraph = root.querySelector<HTMLElement>(
      '[data-paragraph-id="coef:x2:cluster:x2:pos:0"]',
    );
    paragraph?.dispatchEvent(new Event("mouseenter"));
    await app.settle();

    // keyphrases and original context paragraphs
    paragraph?.querySelector<HTMLButtonElement>(".show-keyphrases")?.click();
    await app.settle();
    root.querySelector<HTMLElement>(".keyphrase")?.click();
    await vi.waitFor(() => {
      expect(root.querySelectorAll("mark").length).toBeGreaterThan(0);
    });

    // report authoring
    await app.openReport("Demo report");
    await app.report.addParagraph("Opening paragraph.");

    // the audit itself
    const allowed = servedTokens(svc.served);
    const rendered = domTokens(root);
    expect(rendered.length).toBeGreaterThan(50);
    const offenders = rendered.filter(({ token }) => !allowed.has(token));
    expect(offenders).toEqual([]);
  });

  it("rejects a DOM that invents a number (audit is not vacuous)", async () => {
    document.body.innerHTML = "";
    const root = document.createElement("div");
    document.body.appendChild(root);
    const svc = fakeService();
    const app = new App(root, new ApiClient("", svc.fetcher));
    await app.boot();

    const rogue = document.createElement("p");
    rogue.textContent = "locally computed mean: 123.456789";
    root.appendChild(rogue);

    const allowed = servedTokens(svc.served);
    const offenders = domTokens(root).filter(({ token }) => !allowed.has(token));
    expect(offenders.map(({ token }) => token)).toContain("123.456789");
  });
});
