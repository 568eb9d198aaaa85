import { beforeEach, describe, expect, it } from "vitest";

import { ApiError, CartResponse, ChatResponse } from "../src/api";
import { Conversation } from "../src/conversation";
import { findElements, wire } from "../src/render";

class FakeApi {
  chatResponses: ChatResponse[] = [];
  cartResponse: CartResponse | Error = {
    session_id: "s1",
    lines: [],
    customer: { name: false, address: false, phone: false },
  };
  chatCalls: Array<{ session_id?: string; user_id: string; text: string }> = [];
  failNextChat = false;

  async chat(body: { session_id?: string; user_id: string; text: string }): Promise<ChatResponse> {
    this.chatCalls.push(body);
    if (this.failNextChat) {
      this.failNextChat = false;
      throw new Error("network down");
    }
    const response = this.chatResponses.shift();
    if (!response) throw new Error("no scripted response left");
    return response;
  }

  async cart(): Promise<CartResponse> {
    if (this.cartResponse instanceof Error) throw this.cartResponse;
    return this.cartResponse;
  }
}

function botSays(texts: string[], extra: Partial<ChatResponse> = {}): ChatResponse {
  return {
    session_id: "s1",
    replies: texts,
    quick_replies: [],
    ended: false,
    ...extra,
  };
}

describe("Conversation", () => {
  let api: FakeApi;
  let conversation: Conversation;

  beforeEach(() => {
    api = new FakeApi();
    conversation = new Conversation(api as never, "user-1");
  });

  it("appends the user message optimistically, then each bot reply", async () => {
    api.chatResponses.push(botSays(["Hello!", "How can I help?"]));
    await conversation.send("hello");
    expect(conversation.messages.map((m) => [m.author, m.text])).toEqual([
      ["user", "hello"],
      ["bot", "Hello!"],
      ["bot", "How can I help?"],
    ]);
  });

  it("ignores empty or whitespace-only input", async () => {
    await conversation.send("   ");
    expect(conversation.messages).toHaveLength(0);
    expect(api.chatCalls).toHaveLength(0);
  });

  it("stores quick replies and clears them on the next send", async () => {
    api.chatResponses.push(botSays(["Add it?"], { quick_replies: ["Yes", "No"] }));
    await conversation.send("i want apple juice");
    expect(conversation.quickReplies).toEqual(["Yes", "No"]);
    api.chatResponses.push(botSays(["Added."]));
    await conversation.send("Yes");
    expect(conversation.quickReplies).toEqual([]);
  });

  it("reuses the session id from the first reply", async () => {
    api.chatResponses.push(botSays(["hi"]), botSays(["again"]));
    await conversation.send("one");
    await conversation.send("two");
    expect(api.chatCalls[0].session_id).toBeUndefined();
    expect(api.chatCalls[1].session_id).toBe("s1");
  });

  it("refuses to send once the conversation ended", async () => {
    api.chatResponses.push(botSays(["closed"], { ended: true }));
    await conversation.send("spam");
    expect(conversation.ended).toBe(true);
    await conversation.send("more");
    expect(api.chatCalls).toHaveLength(1);
  });

  it("marks the message unsent on network failure and retries it", async () => {
    api.failNextChat = true;
    await conversation.send("hello");
    expect(conversation.messages[0].unsent).toBe(true);

    api.chatResponses.push(botSays(["Hello!"]));
    await conversation.retry();
    expect(conversation.messages[0].unsent).toBe(false);
    expect(conversation.messages[1].text).toBe("Hello!");
    expect(api.chatCalls.map((c) => c.text)).toEqual(["hello", "hello"]);
  });

  it("refreshes the cart when a reply carries a snapshot", async () => {
    api.cartResponse = {
      session_id: "s1",
      lines: [{ product: "Apple Juice", brand: "Green Farm", category: "beverages", quantity: 2 }],
      customer: { name: false, address: false, phone: false },
    };
    api.chatResponses.push(botSays(["Added."], { cart: [] }));
    await conversation.send("yes");
    expect(conversation.cartView).toEqual([
      { product: "Apple Juice", brand: "Green Farm", category: "beverages", quantity: 2 },
    ]);
  });

  it("treats a 404 cart as empty and an outage as stale", async () => {
    conversation.sessionId = "s1";
    api.cartResponse = new ApiError(404, "gone");
    await conversation.refreshCart();
    expect(conversation.cartView).toEqual([]);
    expect(conversation.cartStale).toBe(false);

    api.cartResponse = new Error("connection refused");
    await conversation.refreshCart();
    expect(conversation.cartStale).toBe(true);
  });
});

function mountPage(): void {
  document.body.innerHTML = `
    <div id="transcript"></div>
    <div id="quick-replies"></div>
    <div id="cart-pane"></div>
    <input id="chat-input">
    <button id="send-button">Send</button>
    <span id="status"></span>
  `;
}

async function settle(conversation: Conversation): Promise<void> {
  for (let i = 0; i < 200 && conversation.busy; i++) {
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
}

describe("renderer", () => {
  let api: FakeApi;
  let conversation: Conversation;

  beforeEach(() => {
    mountPage();
    api = new FakeApi();
    conversation = new Conversation(api as never, "user-1");
    wire(conversation, findElements(document));
  });

  it("renders the transcript in exchange order", async () => {
    api.chatResponses.push(botSays(["Hello!"]), botSays(["Bye!"]));
    await conversation.send("hi");
    await conversation.send("bye");
    const bubbles = [...document.querySelectorAll("#transcript .msg")];
    expect(bubbles.map((b) => b.textContent)).toEqual(["hi", "Hello!", "bye", "Bye!"]);
    expect(bubbles.map((b) => b.className)).toEqual([
      "msg user", "msg bot", "msg user", "msg bot",
    ]);
  });

  it("quick-reply buttons send their visible label verbatim", async () => {
    api.chatResponses.push(botSays(["Add it?"], { quick_replies: ["Yes", "No"] }));
    await conversation.send("i want apple juice");
    const yes = [...document.querySelectorAll<HTMLButtonElement>(".quick-reply")]
      .find((b) => b.textContent === "Yes");
    expect(yes).toBeDefined();
    api.chatResponses.push(botSays(["Added."]));
    yes!.click();
    await settle(conversation);
    expect(api.chatCalls.at(-1)?.text).toBe("Yes");
    expect(document.querySelectorAll(".quick-reply")).toHaveLength(0);
  });

  it("disables the input once the conversation ends", async () => {
    api.chatResponses.push(botSays(["closed"], { ended: true }));
    await conversation.send("spam");
    const input = document.getElementById("chat-input") as HTMLInputElement;
    const button = document.getElementById("send-button") as HTMLButtonElement;
    expect(input.disabled).toBe(true);
    expect(button.disabled).toBe(true);
    expect(document.getElementById("status")!.textContent).toBe("Conversation ended");
  });

  it("shows the cart pane lines with quantities", async () => {
    api.cartResponse = {
      session_id: "s1",
      lines: [{ product: "Apple Juice", brand: "Green Farm", category: "beverages", quantity: 2 }],
      customer: { name: false, address: false, phone: false },
    };
    api.chatResponses.push(botSays(["Added."], { cart: [] }));
    await conversation.send("yes");
    expect(document.getElementById("cart-pane")!.textContent).toContain("Apple Juice × 2");
  });
});
