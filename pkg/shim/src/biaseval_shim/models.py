"""Model-based scorers. Heavy imports happen inside the factories so the
serve loop starts (and answers `info`) without touching model assets."""

from __future__ import annotations


def _encoder(model_name: str):
    import torch
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_name)
    model = AutoModel.from_pretrained(model_name)
    model.eval()

    @torch.no_grad()
    def embed(text: str):
        enc = tokenizer(text, return_tensors="pt", truncation=True,
                        max_length=510)
        out = model(**enc).last_hidden_state[0]
        return out[1:-1] if out.shape[0] > 2 else out  # drop special tokens

    return embed


def bertscore_factory(config):
    """Greedy max-cosine token matching F1 over contextual embeddings."""
    import torch

    embed = _encoder(config.model or "roberta-large")

    @torch.no_grad()
    def score(hyp: str, ref: str) -> float:
        h = torch.nn.functional.normalize(embed(hyp), dim=-1)
        r = torch.nn.functional.normalize(embed(ref), dim=-1)
        sims = h @ r.T
        precision = sims.max(dim=1).values.mean().item()
        recall = sims.max(dim=0).values.mean().item()
        if precision + recall == 0.0:
            return 0.0
        return 2 * precision * recall / (precision + recall)

    return score


def moverscore_factory(config):
    """Word mover's distance over contextual embeddings, as 1/(1+cost)."""
    import numpy as np
    from scipy.optimize import linprog

    embed = _encoder(config.model or "bert-base-uncased")

    def score(hyp: str, ref: str) -> float:
        h = embed(hyp).numpy()
        r = embed(ref).numpy()
        m, n = len(h), len(r)
        diff = h[:, None, :] - r[None, :, :]
        cost = np.sqrt((diff * diff).sum(axis=2))
        a_eq = np.zeros((m + n, m * n))
        for i in range(m):
            a_eq[i, i * n:(i + 1) * n] = 1.0
        for j in range(n):
            a_eq[m + j, j::n] = 1.0
        b_eq = np.concatenate([np.full(m, 1.0 / m), np.full(n, 1.0 / n)])
        res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None),
                      method="highs")
        if not res.success:
            raise RuntimeError(f"transport LP failed: {res.message}")
        return 1.0 / (1.0 + max(0.0, float(res.fun)))

    return score


def bleurt_factory(config):
    """Regression head score from a BLEURT checkpoint."""
    import torch
    from transformers import (AutoModelForSequenceClassification,
                              AutoTokenizer)

    name = config.model or "Elron/bleurt-base-512"
    tokenizer = AutoTokenizer.from_pretrained(name)
    model = AutoModelForSequenceClassification.from_pretrained(name)
    model.eval()

    @torch.no_grad()
    def score(hyp: str, ref: str) -> float:
        enc = tokenizer(ref, hyp, return_tensors="pt", truncation=True,
                        max_length=512)
        return float(model(**enc).logits.flatten()[0])

    return score


def bartscore_factory(config):
    """Mean log-likelihood of generating the reference from the hypothesis."""
    import torch
    from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

    name = config.model or "facebook/bart-large-cnn"
    tokenizer = AutoTokenizer.from_pretrained(name)
    model = AutoModelForSeq2SeqLM.from_pretrained(name)
    model.eval()
    loss_fn = torch.nn.NLLLoss(reduction="mean", ignore_index=model.config.pad_token_id)

    @torch.no_grad()
    def score(hyp: str, ref: str) -> float:
        src = tokenizer(hyp, return_tensors="pt", truncation=True,
                        max_length=1024)
        tgt = tokenizer(ref, return_tensors="pt", truncation=True,
                        max_length=1024)
        logits = model(input_ids=src.input_ids,
                       attention_mask=src.attention_mask,
                       labels=tgt.input_ids).logits
        logprobs = torch.log_softmax(logits, dim=-1)
        return float(-loss_fn(logprobs.squeeze(0), tgt.input_ids.squeeze(0)))

    return score
