#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Model server for the `remote` backend.

Wraps a Hugging Face causal LM (optionally with a LoRA adapter from peft) and
answers the JSON-over-HTTP protocol the C++ RemoteBackend speaks.

    pip install torch transformers peft
    python tools/lm_server.py --model Qwen/Qwen2.5-0.5B-Instruct --port 8765

Adapters are written as peft directories at the path the client names.

Then point a config at it:

    "backend": {"kind": "remote", "url": "http://127.0.0.1:8765",
                "model": "Qwen/Qwen2.5-0.5B-Instruct"}
"""
import argparse
import hashlib
import json
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import torch
from transformers import AutoModelForCausalLM, AutoTokenizer


class Unsupported(Exception):
    pass


class Model:
    def __init__(self, args):
        self.name = args.model
        self.device = args.device
        torch.manual_seed(args.seed)
        self.tok = AutoTokenizer.from_pretrained(args.model)
        base = AutoModelForCausalLM.from_pretrained(args.model, torch_dtype=getattr(torch, args.dtype))
        self.base_hash = self._hash_params(base)
        self.trainable = False
        if args.lora_rank > 0:
            from peft import LoraConfig, get_peft_model

            cfg = LoraConfig(r=args.lora_rank, lora_alpha=args.lora_alpha, lora_dropout=args.lora_dropout,
                             target_modules=args.lora_targets.split(","), task_type="CAUSAL_LM")
            base = get_peft_model(base, cfg)
            self.trainable = True
        self.model = base.to(self.device)
        self.model.eval()
        self.dtype = args.dtype
        self.optimizer = None
        self.pending = {}
        self.next_handle = 0
        self.lock = threading.Lock()

    @staticmethod
    def _hash_params(model):
        h = hashlib.sha256()
        for name, p in sorted(model.state_dict().items()):
            h.update(name.encode())
            h.update(p.detach().cpu().float().numpy().tobytes())
        return h.hexdigest()

    def adapter_params(self):
        return [(n, p) for n, p in self.model.named_parameters() if p.requires_grad]

    def encode(self, prompt):
        ids = self.tok(prompt, return_tensors="pt", add_special_tokens=False).input_ids.to(self.device)
        if ids.shape[1] > self.tok.model_max_length:
            raise ValueError("prompt longer than the context window")
        return ids

    def last_logits(self, prompt):
        return self.model(self.encode(prompt)).logits[0, -1].float()

    # -- endpoints -------------------------------------------------------

    def info(self):
        return {"model": self.name, "vocab_size": len(self.tok), "context_length": int(self.tok.model_max_length),
                "trainable": self.trainable, "deterministic": True,
                "flags": {"dtype": self.dtype, "device": self.device}}

    def logits(self, j):
        with torch.no_grad():
            z = self.last_logits(j["prompt"])
        if "token_ids" in j:
            z = z[torch.tensor(j["token_ids"], device=z.device)]
        return {"logits": z.cpu().tolist()}

    def token_id(self, j):
        context = j.get("context", "")
        base = self.tok(context, add_special_tokens=False).input_ids
        full = self.tok(context + j["label"], add_special_tokens=False).input_ids
        if full[:len(base)] != base or len(full) == len(base):
            raise ValueError("label does not tokenize cleanly after its context")
        return {"token_id": full[len(base)]}

    def decode(self, j):
        return {"text": self.tok.decode([j["token_id"]])}

    def generate(self, j):
        ids = self.encode(j["prompt"])
        with torch.no_grad():
            out = self.model.generate(ids, max_new_tokens=j["max_new_tokens"], do_sample=False)
        return {"text": self.tok.decode(out[0, ids.shape[1]:], skip_special_tokens=True)}

    def train_mode(self, j):
        self.model.train(bool(j["training"]))
        return {}

    def forward(self, j):
        self._need_training()
        z = self.last_logits(j["prompt"])[torch.tensor(j["token_ids"], device=self.device)]
        self.next_handle += 1
        self.pending[self.next_handle] = z
        return {"handle": self.next_handle, "logits": z.detach().cpu().tolist()}

    def backward(self, j):
        z = self.pending.pop(j["handle"])
        z.backward(torch.tensor(j["grad"], dtype=z.dtype, device=z.device))
        return {}

    def zero_grad(self, j):
        self._need_training()
        for _, p in self.adapter_params():
            p.grad = None
        return {}

    def step(self, j):
        self._need_training()
        if self.optimizer is None:
            c = j["optimizer"]
            params = [p for _, p in self.adapter_params()]
            if c["name"] == "sgd":
                self.optimizer = torch.optim.SGD(params, lr=c["learning_rate"], weight_decay=c["weight_decay"])
            else:
                self.optimizer = torch.optim.AdamW(params, lr=c["learning_rate"], betas=(c["beta1"], c["beta2"]),
                                                   eps=c["epsilon"], weight_decay=c["weight_decay"])
        self.optimizer.step()
        return {}

    def snapshot(self, j):
        self._need_training()
        return {n: p.detach().cpu().float().flatten().tolist() for n, p in self.adapter_params()}

    def restore(self, j):
        self._need_training()
        with torch.no_grad():
            for n, p in self.adapter_params():
                p.copy_(torch.tensor(j[n], dtype=p.dtype).view_as(p))
        return {}

    def save(self, j):
        self._need_training()
        self.model.save_pretrained(j["path"])
        return {}

    def load(self, j):
        self._need_training()
        from peft import set_peft_model_state_dict
        from safetensors.torch import load_file

        path = os.path.join(j["path"], "adapter_model.safetensors")
        set_peft_model_state_dict(self.model, load_file(path))
        return {}

    def base_weights_hash(self, j):
        return {"hash": self.base_hash}

    def _need_training(self):
        if not self.trainable:
            raise Unsupported("server started without --lora-rank")


ROUTES = {
    "/logits": "logits", "/token_id": "token_id", "/decode": "decode", "/generate": "generate",
    "/train_mode": "train_mode", "/forward": "forward", "/backward": "backward", "/zero_grad": "zero_grad",
    "/step": "step", "/snapshot": "snapshot", "/restore": "restore", "/save": "save", "/load": "load",
    "/base_hash": "base_weights_hash",
}


def make_handler(model):
    class Handler(BaseHTTPRequestHandler):
        def _send(self, status, body):
            data = json.dumps(body).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            if self.path == "/info":
                self._send(200, model.info())
            else:
                self._send(404, {"error": "unknown endpoint " + self.path})

        def do_POST(self):
            name = ROUTES.get(self.path)
            if name is None:
                self._send(404, {"error": "unknown endpoint " + self.path})
                return
            try:
                body = json.loads(self.rfile.read(int(self.headers.get("Content-Length", 0))) or b"{}")
                with model.lock:
                    self._send(200, getattr(model, name)(body))
            except Unsupported as e:
                self._send(501, {"error": str(e)})
            except Exception as e:  # reported to the client as a backend error
                self._send(500, {"error": f"{type(e).__name__}: {e}"})

        def log_message(self, fmt, *args):
            pass

    return Handler


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", required=True)
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8765)
    ap.add_argument("--device", default="cuda" if torch.cuda.is_available() else "cpu")
    ap.add_argument("--dtype", default="float32", choices=["float32", "bfloat16", "float16"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lora-rank", type=int, default=0, help="0 serves inference only")
    ap.add_argument("--lora-alpha", type=float, default=32.0)
    ap.add_argument("--lora-dropout", type=float, default=0.05)
    ap.add_argument("--lora-targets", default="q_proj,v_proj")
    args = ap.parse_args()
    model = Model(args)
    server = ThreadingHTTPServer((args.host, args.port), make_handler(model))
    print(f"serving {args.model} on http://{args.host}:{args.port}", flush=True)
    server.serve_forever()


if __name__ == "__main__":
    main()
