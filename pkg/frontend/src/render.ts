// DOM renderer: binds a Conversation to the chat page. The transcript is
// re-rendered from state on every change, so the DOM order always equals
// the exchange order; quick-reply buttons send their visible label verbatim.

import { Conversation } from "./conversation.js";

export interface ChatElements {
  transcript: HTMLElement;
  quickReplies: HTMLElement;
  cartPane: HTMLElement;
  input: HTMLInputElement;
  sendButton: HTMLButtonElement;
  status: HTMLElement;
}

export function findElements(root: Document): ChatElements {
  const get = (id: string) => {
    const el = root.getElementById(id);
    if (!el) throw new Error(`missing #${id}`);
    return el;
  };
  return {
    transcript: get("transcript"),
    quickReplies: get("quick-replies"),
    cartPane: get("cart-pane"),
    input: get("chat-input") as HTMLInputElement,
    sendButton: get("send-button") as HTMLButtonElement,
    status: get("status"),
  };
}

export function render(conversation: Conversation, els: ChatElements): void {
  const doc = els.transcript.ownerDocument;

  els.transcript.replaceChildren();
  for (const message of conversation.messages) {
    const bubble = doc.createElement("div");
    bubble.className = `msg ${message.author}${message.unsent ? " unsent" : ""}`;
    bubble.textContent = message.text;
    if (message.unsent) {
      const retry = doc.createElement("button");
      retry.className = "retry";
      retry.textContent = "retry";
      retry.addEventListener("click", () => void conversation.retry());
      bubble.appendChild(retry);
    }
    els.transcript.appendChild(bubble);
  }
  els.transcript.scrollTop = els.transcript.scrollHeight;

  els.quickReplies.replaceChildren();
  for (const label of conversation.quickReplies) {
    const button = doc.createElement("button");
    button.className = "quick-reply";
    button.textContent = label;
    button.addEventListener("click", () => void conversation.send(label));
    els.quickReplies.appendChild(button);
  }

  els.cartPane.replaceChildren();
  if (conversation.cartView.length === 0) {
    const empty = doc.createElement("div");
    empty.className = "cart-empty";
    empty.textContent = "Cart is empty";
    els.cartPane.appendChild(empty);
  } else {
    for (const line of conversation.cartView) {
      const row = doc.createElement("div");
      row.className = "cart-line";
      row.textContent = `${line.product} × ${line.quantity}`;
      els.cartPane.appendChild(row);
    }
  }
  els.cartPane.classList.toggle("stale", conversation.cartStale);

  const locked = conversation.ended || conversation.busy;
  els.input.disabled = locked;
  els.sendButton.disabled = locked;
  els.status.textContent = conversation.ended
    ? "Conversation ended"
    : conversation.busy
      ? "..."
      : "";
}

export function wire(conversation: Conversation, els: ChatElements): void {
  conversation.onChange(() => render(conversation, els));

  const submit = () => {
    const text = els.input.value;
    els.input.value = "";
    void conversation.send(text);
  };
  els.sendButton.addEventListener("click", submit);
  els.input.addEventListener("keydown", (event) => {
    if ((event as KeyboardEvent).key === "Enter") {
      event.preventDefault();
      submit();
    }
  });
  render(conversation, els);
}
