"""Independent numpy recomputation of the resolution pipeline.

Reimplements every stage (recurrent encoding, inner-span attention, span
assembly, contextual scoring, pruning, source weighting, pairwise knowledge
scoring, aggregation, decision rule) from the model's raw parameter arrays,
without calling any model code.
"""

import numpy as np

_PRONOUN_TABLE = {
    "he": ("singular", "male"), "him": ("singular", "male"),
    "his": ("singular", "male"), "she": ("singular", "female"),
    "her": ("singular", "female"), "hers": ("singular", "female"),
    "it": ("singular", "neutral"), "its": ("singular", "neutral"),
    "they": ("plural", "any"), "them": ("plural", "any"),
    "their": ("plural", "any"), "theirs": ("plural", "any"),
}


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _softmax(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(x - x.max())
    return e / e.sum()


def _bucket(count):
    if count == 0:
        return 0
    if count <= 4:
        return count
    if count <= 7:
        return 5
    if count <= 15:
        return 6
    if count <= 31:
        return 7
    if count <= 63:
        return 8
    return 9


def _width_bucket(width):
    if width <= 4:
        return width - 1
    if width <= 7:
        return 4
    return 5


def _feature(source, mention, pronoun, kb):
    plurality, gender_class = _PRONOUN_TABLE[pronoun.surface.lower()]
    if source == "plurality":
        return int(mention.plurality == plurality)
    if source == "ag":
        if gender_class in ("male", "female"):
            return int(mention.animacy == "animate" and mention.gender == gender_class)
        if gender_class == "neutral":
            return int(mention.animacy == "inanimate" or mention.gender == "neutral")
        return int(not (mention.animacy == "unknown" and mention.gender == "unknown"))
    if pronoun.governor_lemma is None:
        return 0
    return _bucket(kb.query(pronoun.governor_lemma, mention.head_lemma,
                            pronoun.dep_relation))


class OracleNet:
    """Plain arrays extracted from a trained model's state dict."""

    def __init__(self, model):
        self.config = model.config
        state = {k: v.detach().cpu().numpy().astype(np.float64)
                 for k, v in model.state_dict().items()}
        self.state = state
        self.vocab_index = {w: i + 1 for i, w in enumerate(model.embeddings.vocabulary)}

    def _ffnn(self, prefix, x):
        x = np.asarray(x, dtype=np.float64)
        i = 0
        while f"{prefix}.layers.{i}.weight" in self.state:
            w = self.state[f"{prefix}.layers.{i}.weight"]
            b = self.state[f"{prefix}.layers.{i}.bias"]
            x = x @ w.T + b
            if f"{prefix}.layers.{i + 1}.weight" in self.state:
                x = np.maximum(x, 0.0)
            i += 1
        return x

    def _lstm_direction(self, x, suffix):
        w_ih = self.state[f"encoder.lstm.weight_ih_l0{suffix}"]
        w_hh = self.state[f"encoder.lstm.weight_hh_l0{suffix}"]
        b_ih = self.state[f"encoder.lstm.bias_ih_l0{suffix}"]
        b_hh = self.state[f"encoder.lstm.bias_hh_l0{suffix}"]
        hidden = w_hh.shape[1]
        steps = range(x.shape[0])
        if suffix:
            steps = reversed(steps)
        h = np.zeros(hidden)
        c = np.zeros(hidden)
        out = np.zeros((x.shape[0], hidden))
        for t in steps:
            gates = w_ih @ x[t] + b_ih + w_hh @ h + b_hh
            i_g, f_g, g_g, o_g = np.split(gates, 4)
            i_g, f_g, o_g = _sigmoid(i_g), _sigmoid(f_g), _sigmoid(o_g)
            g_g = np.tanh(g_g)
            c = f_g * c + i_g * g_g
            h = o_g * np.tanh(c)
            out[t] = h
        return out

    def encode(self, tokens):
        table = self.state["embeddings.table.weight"]
        idx = [self.vocab_index.get(t, 0) for t in tokens]
        raw = table[idx]
        enc = np.concatenate([self._lstm_direction(raw, ""),
                              self._lstm_direction(raw, "_reverse")], axis=1)
        return raw, enc

    def span_rep(self, raw, enc, start, end):
        logits = self._ffnn("span_scorer", enc[start:end + 1]).reshape(-1)
        weights = _softmax(logits)
        source = raw if self.config.span_weighting == "raw" else enc
        weighted = weights @ source[start:end + 1]
        width_vec = self.state["width_embedding.weight"][_width_bucket(end - start + 1)]
        return np.concatenate([enc[start], enc[end], weighted, width_vec])


def resolve_oracle(model, doc, pronoun, kb, threshold):
    """Step-by-step recomputation; returns a dict of per-candidate values."""
    net = OracleNet(model)
    cfg = net.config
    lo = max(0, pronoun.sentence_idx - 2)
    candidates = sorted(
        (m for m in doc.mentions
         if not m.is_pronominal and lo <= m.sentence_idx <= pronoun.sentence_idx),
        key=lambda m: (m.sentence_idx, m.start))
    encodings = {}
    for idx in {m.sentence_idx for m in candidates} | {pronoun.sentence_idx}:
        encodings[idx] = net.encode(list(doc.sentences[idx]))
    reps = []
    for m in candidates:
        raw, enc = encodings[m.sentence_idx]
        reps.append(net.span_rep(raw, enc, m.start, m.end))
    raw, enc = encodings[pronoun.sentence_idx]
    pron_rep = net.span_rep(raw, enc, pronoun.token_idx, pronoun.token_idx)

    features = np.array([[_feature(s, m, pronoun, kb) for s in cfg.sources]
                         for m in candidates], dtype=int).reshape(len(candidates),
                                                                  len(cfg.sources))

    if cfg.variant == "feature_concat":
        rows = []
        for i, e in enumerate(reps):
            k_flat = np.concatenate(
                [net.state[f"feature_embeddings.{s}.weight"][features[i, j]]
                 for j, s in enumerate(cfg.sources)]) if cfg.sources else np.zeros(0)
            rows.append(np.concatenate([e, k_flat]))
        pron_full = np.concatenate([pron_rep, np.zeros(len(cfg.sources) * cfg.feature_dim)])
        scores = np.array([
            net._ffnn("concat_scorer",
                      np.concatenate([row, pron_full, row * pron_full])).item()
            for row in rows])
        return {
            "candidates": [m.mention_id for m in candidates],
            "context_scores": scores,
            "kept": np.ones(len(candidates), dtype=bool),
            "total": scores,
            "predicted": {m.mention_id for m, s in zip(candidates, scores) if s > 0},
        }

    scores = np.array([
        net._ffnn("context_scorer",
                  np.concatenate([e, pron_rep, e * pron_rep])).item()
        for e in reps])
    result = {
        "candidates": [m.mention_id for m in candidates],
        "context_scores": scores,
    }
    if len(candidates) == 0:
        result.update(kept=np.zeros(0, dtype=bool), total=np.zeros(0), predicted=set())
        return result
    probs = _softmax(scores)
    kept = probs >= threshold
    kept[int(np.argmax(scores))] = True
    result["probs"] = probs
    result["kept"] = kept
    survivors = [i for i in range(len(candidates)) if kept[i]]
    m_src = len(cfg.sources)
    knowledge = np.zeros(len(survivors))
    if m_src > 0 and len(survivors) > 1:
        k_emb = np.stack([
            np.stack([net.state[f"feature_embeddings.{s}.weight"][features[i, j]]
                      for j, s in enumerate(cfg.sources)])
            for i in survivors])
        for a, i in enumerate(survivors):
            pair_values = []
            for b, j in enumerate(survivors):
                if i == j:
                    continue
                betas = []
                fs = []
                for src in range(m_src):
                    o_i = np.concatenate([reps[i], k_emb[a, src]])
                    o_j = np.concatenate([reps[j], k_emb[b, src]])
                    if not cfg.uniform_attention:
                        betas.append(net._ffnn(
                            "attention_scorer",
                            np.concatenate([o_i, o_j, o_i * o_j])).item())
                    fs.append(net._ffnn(
                        "knowledge_scorer",
                        np.concatenate([k_emb[a, src], k_emb[b, src],
                                        k_emb[a, src] * k_emb[b, src]])).item())
                if cfg.uniform_attention:
                    weights = np.full(m_src, 1.0 / m_src)
                else:
                    weights = _softmax(np.array(betas))
                pair_values.append(float(weights @ np.array(fs)))
            knowledge[a] = np.mean(pair_values)
    total = scores[survivors] + knowledge
    result["knowledge"] = knowledge
    result["total"] = total
    result["predicted"] = {candidates[i].mention_id
                           for a, i in enumerate(survivors) if total[a] > 0}
    return result
