// Typed client for the two gateway endpoints the web chat consumes.

export interface CartLine {
  product: string;
  brand: string;
  category: string;
  quantity: number;
}

export interface ChatResponse {
  session_id: string;
  replies: string[];
  quick_replies: string[];
  ended: boolean;
  cart?: CartLine[];
}

export interface CartResponse {
  session_id: string;
  lines: CartLine[];
  customer: { name: boolean; address: boolean; phone: boolean };
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ChatApi {
  constructor(private baseUrl: string = "") {}

  async chat(body: { session_id?: string; user_id: string; text: string }): Promise<ChatResponse> {
    const res = await fetch(`${this.baseUrl}/v1/chat`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) {
      throw new ApiError(res.status, `chat failed with ${res.status}`);
    }
    return (await res.json()) as ChatResponse;
  }

  async cart(sessionId: string): Promise<CartResponse> {
    const res = await fetch(`${this.baseUrl}/v1/session/${encodeURIComponent(sessionId)}/cart`);
    if (!res.ok) {
      throw new ApiError(res.status, `cart fetch failed with ${res.status}`);
    }
    return (await res.json()) as CartResponse;
  }
}
