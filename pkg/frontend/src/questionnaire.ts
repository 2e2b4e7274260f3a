/**
 * SEQ and SUS form models: completeness and range validation, frame
 * building, and a local score preview (the server score is authoritative).
 */

import { QuestionnaireFrame, seqFrame, susFrame } from "./protocol.js";

export const SUS_ITEMS = 10;

export class SusForm {
  readonly answers: (number | null)[] = new Array(SUS_ITEMS).fill(null);

  set(item: number, value: number): void {
    if (item < 0 || item >= SUS_ITEMS) {
      throw new Error(`SUS item ${item} out of range`);
    }
    if (!Number.isInteger(value) || value < 1 || value > 5) {
      throw new Error(`SUS answers are integers 1..5, got ${value}`);
    }
    this.answers[item] = value;
  }

  missing(): number[] {
    return this.answers.flatMap((v, i) => (v === null ? [i] : []));
  }

  complete(): boolean {
    return this.missing().length === 0;
  }

  /** Standard scoring: odd items value-1, even items 5-value, total x 2.5. */
  score(): number {
    if (!this.complete()) {
      throw new Error("SUS form incomplete");
    }
    let total = 0;
    this.answers.forEach((value, i) => {
      total += i % 2 === 0 ? (value as number) - 1 : 5 - (value as number);
    });
    return total * 2.5;
  }

  toFrame(): QuestionnaireFrame {
    if (!this.complete()) {
      throw new Error("SUS form incomplete");
    }
    return susFrame(this.answers as number[]);
  }

  reset(): void {
    this.answers.fill(null);
  }
}

export class SeqForm {
  value: number | null = null;

  set(value: number): void {
    if (!Number.isInteger(value) || value < 1 || value > 7) {
      throw new Error(`SEQ rating is an integer 1..7, got ${value}`);
    }
    this.value = value;
  }

  complete(): boolean {
    return this.value !== null;
  }

  toFrame(): QuestionnaireFrame {
    if (this.value === null) {
      throw new Error("SEQ rating missing");
    }
    return seqFrame(this.value);
  }

  reset(): void {
    this.value = null;
  }
}
