import { describe, expect, it } from "vitest";

import { SeqForm, SusForm } from "../src/questionnaire.js";

describe("SusForm", () => {
  it("blocks submission until every item is answered", () => {
    const form = new SusForm();
    for (let i = 0; i < 9; i++) {
      form.set(i, 3);
    }
    expect(form.complete()).toBe(false);
    expect(form.missing()).toEqual([9]);
    expect(() => form.toFrame()).toThrow();
    form.set(9, 3);
    expect(form.complete()).toBe(true);
    expect(form.toFrame().responses).toEqual(new Array(10).fill(3));
  });

  it("scores all threes as exactly fifty", () => {
    const form = new SusForm();
    for (let i = 0; i < 10; i++) {
      form.set(i, 3);
    }
    expect(form.score()).toBe(50);
  });

  it("scores the best-possible answers as one hundred", () => {
    const form = new SusForm();
    for (let i = 0; i < 10; i++) {
      form.set(i, i % 2 === 0 ? 5 : 1);
    }
    expect(form.score()).toBe(100);
  });

  it("rejects out-of-range answers", () => {
    const form = new SusForm();
    expect(() => form.set(0, 0)).toThrow();
    expect(() => form.set(0, 6)).toThrow();
    expect(() => form.set(0, 2.5)).toThrow();
    expect(() => form.set(10, 3)).toThrow();
  });

  it("resets", () => {
    const form = new SusForm();
    form.set(0, 4);
    form.reset();
    expect(form.answers.every((v) => v === null)).toBe(true);
  });
});

describe("SeqForm", () => {
  it("accepts ratings one through seven", () => {
    const form = new SeqForm();
    form.set(7);
    expect(form.toFrame()).toEqual({
      type: "questionnaire",
      kind: "seq",
      responses: 7,
    });
  });

  it("rejects out-of-range ratings and empty submits", () => {
    const form = new SeqForm();
    expect(() => form.set(0)).toThrow();
    expect(() => form.set(8)).toThrow();
    expect(form.complete()).toBe(false);
    expect(() => form.toFrame()).toThrow();
  });
});
