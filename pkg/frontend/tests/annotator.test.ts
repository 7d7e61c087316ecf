import { describe, expect, it } from "vitest";
import { AnnotationState } from "../src/annotator.js";
import { rleDecode } from "../src/rle.js";

function painted(width = 16, height = 16, frames = 4): AnnotationState {
  const state = new AnnotationState(width, height, frames);
  state.paint({ x: 5, y: 5 }, 2.5);
  return state;
}

describe("AnnotationState", () => {
  it("blocks submission for empty regions and missing trajectories", () => {
    const state = new AnnotationState(8, 8, 4);
    expect(state.submissionBlockers()[0]).toMatch(/region is empty/);
    state.paint({ x: 4, y: 4 }, 2);
    expect(state.submissionBlockers()[0]).toMatch(/no trajectory/);
    state.setTrajectory([{ x: 4, y: 4 }]);
    expect(state.submissionBlockers()).toEqual([]);
  });

  it("stroke then erase to empty blocks submission again", () => {
    const state = painted();
    state.setTrajectory([{ x: 5, y: 5 }, { x: 9, y: 5 }]);
    expect(state.submissionBlockers()).toEqual([]);
    state.paint({ x: 5, y: 5 }, 8, true); // erase everything
    expect(state.submissionBlockers()[0]).toMatch(/region is empty/);
  });

  it("gives entities distinct ids and colors", () => {
    const state = painted();
    const second = state.addEntity();
    expect(second.id).not.toBe(state.entities[0].id);
    expect(second.color).not.toBe(state.entities[0].color);
  });

  it("resamples trajectories to exactly L points", () => {
    const state = painted(16, 16, 6);
    state.setTrajectory([{ x: 5, y: 5 }, { x: 12, y: 5 }]);
    expect(state.current.trajectory).toHaveLength(6);
  });

  it("snaps a start outside the region and flags it", () => {
    const state = painted();
    state.setTrajectory([{ x: 14, y: 14 }, { x: 15, y: 15 }]);
    expect(state.current.trajectorySnapped).toBe(true);
    const start = state.current.trajectory![0];
    expect(state.current.bitmap[Math.round(start.y) * 16 + Math.round(start.x)]).toBe(1);
  });

  it("serializes to the wire format with a decodable mask", () => {
    const state = painted(16, 16, 4);
    state.setTrajectory([{ x: 5, y: 5 }]);
    const doc = state.toAnnotationDoc();
    expect(doc.frames).toBe(4);
    expect(doc.entities[0].trajectory).toHaveLength(4);
    const decoded = rleDecode(doc.entities[0].mask_rle, 16, 16);
    expect(Array.from(decoded)).toEqual(Array.from(state.entities[0].bitmap));
  });

  it("refuses mutation while locked (job in flight)", () => {
    const state = painted();
    state.setTrajectory([{ x: 5, y: 5 }]);
    state.lock();
    expect(() => state.paint({ x: 3, y: 3 }, 1)).toThrow(/in flight/);
    expect(() => state.setTrajectory([{ x: 5, y: 5 }])).toThrow(/in flight/);
    state.unlock();
    state.paint({ x: 3, y: 3 }, 1);
  });

  it("requires a painted region before a trajectory", () => {
    const state = new AnnotationState(8, 8, 3);
    expect(() => state.setTrajectory([{ x: 2, y: 2 }])).toThrow(/paint/);
  });
});
