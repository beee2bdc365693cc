// Input Box: free-text prompt plus six suggestion chips (3 aligned,
// 3 diversified). Clicking a chip appends its adjective to the prompt text.

import type { Suggestions } from "./types.js";

export class InputBox {
  text = "";
  suggestions: Suggestions = { aligned: [], diversified: [] };
  onChange: () => void = () => {};

  setText(text: string): void {
    this.text = text;
    this.onChange();
  }

  setSuggestions(suggestions: Suggestions): void {
    this.suggestions = suggestions;
    this.onChange();
  }

  appendAdjective(adjective: string): void {
    const trimmed = this.text.trimEnd();
    this.text = trimmed.length ? `${trimmed} ${adjective}` : adjective;
    this.onChange();
  }

  chips(): { label: string; kind: "aligned" | "diversified" }[] {
    return [
      ...this.suggestions.aligned.map((label) => ({ label, kind: "aligned" as const })),
      ...this.suggestions.diversified.map((label) => ({ label, kind: "diversified" as const })),
    ];
  }
}
