"""Straight-line scalar re-implementations used as test oracles.

Plain Python floats and lists only: no Tensor, no numpy broadcasting.
"""

import math


def vec(a):
    return [float(x) for x in a]


def mat(a):
    return [[float(x) for x in row] for row in a]


def matvec(x, w, b=None):
    """x (in,) times w (in, out) plus b."""
    out = []
    for j in range(len(w[0])):
        s = sum(x[i] * w[i][j] for i in range(len(x)))
        out.append(s + (b[j] if b is not None else 0.0))
    return out


def layer_norm(x, g, s, eps=1e-5):
    m = sum(x) / len(x)
    v = sum((xi - m) ** 2 for xi in x) / len(x)
    return [(xi - m) / math.sqrt(v + eps) * gi + si for xi, gi, si in zip(x, g, s)]


def softmax(x):
    top = max(x)
    e = [math.exp(v - top) for v in x]
    z = sum(e)
    return [v / z for v in e]


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def gru(h, u, wi, wh, bi, bh):
    d = len(h)
    gi, gh = matvec(u, wi, bi), matvec(h, wh, bh)
    out = []
    for j in range(d):
        r = sigmoid(gi[j] + gh[j])
        z = sigmoid(gi[d + j] + gh[d + j])
        n = math.tanh(gi[2 * d + j] + r * gh[2 * d + j])
        out.append((1 - z) * n + z * h[j])
    return out


def ln_params(m):
    return vec(m.gain.data), vec(m.shift.data)


def lin_params(m):
    return mat(m.weight.data), (vec(m.bias.data) if m.bias is not None else None)


def slot_attention(sa, inputs, slots, iters):
    """inputs: N lists of width D_in; slots: K lists of width D. Returns (slots, attn[n][k])."""
    d = len(slots[0])
    x = [layer_norm(row, *ln_params(sa.norm_inputs)) for row in inputs]
    keys = [matvec(row, *lin_params(sa.k)) for row in x]
    values = [matvec(row, *lin_params(sa.v)) for row in x]
    wi, wh = mat(sa.gru.w_i.data), mat(sa.gru.w_h.data)
    bi, bh = vec(sa.gru.b_i.data), vec(sa.gru.b_h.data)
    attn = None
    for _ in range(iters):
        q = [matvec(layer_norm(s, *ln_params(sa.norm_slots)), *lin_params(sa.q)) for s in slots]
        attn = []
        for key in keys:
            logits = [sum(key[j] * qk[j] for j in range(d)) / math.sqrt(d) for qk in q]
            attn.append(softmax(logits))
        new = []
        for k, s in enumerate(slots):
            col = [attn[n][k] for n in range(len(keys))]
            total = sum(col) + 1e-8
            upd = [sum(col[n] / total * values[n][j] for n in range(len(keys))) for j in range(d)]
            h = gru(s, upd, wi, wh, bi, bh)
            hid = [max(0.0, v) for v in matvec(layer_norm(h, *ln_params(sa.norm_mlp)), *lin_params(sa.mlp1))]
            out = matvec(hid, *lin_params(sa.mlp2))
            new.append([h[j] + out[j] for j in range(d)])
        slots = new
    return slots, attn


def reasoner_score(r, panels):
    """panels: 9 lists (8 context + candidate) of K slot vectors. Returns the scalar score."""
    k = len(panels[0])
    seq = [s for p in panels for s in p]
    d = len(seq[0])
    g, sh = vec(r.tcn_gain.data), vec(r.tcn_shift.data)
    if r.use_tcn:
        cols = []
        for j in range(d):
            col = [s[j] for s in seq]
            m = sum(col) / len(col)
            v = sum((c - m) ** 2 for c in col) / len(col)
            cols.append([(c - m) / math.sqrt(v + r.tcn_eps) * g[j] + sh[j] for c in col])
        seq = [[cols[j][t] for j in range(d)] for t in range(len(seq))]
    w, b = lin_params(r.rowcol)
    for t in range(len(seq)):
        panel = t // k
        code = [0.0] * 6
        code[panel // 3] = 1.0
        code[3 + panel % 3] = 1.0
        emb = matvec(code, w, b)
        seq[t] = [seq[t][j] + emb[j] for j in range(d)]
    x = [vec(r.cls.data)] + seq
    for block in r.blocks:
        h, dh = block.attn.n_heads, block.attn.d_head
        normed = [layer_norm(t, *ln_params(block.norm1)) for t in x]
        qkv = [matvec(t, *lin_params(block.attn.qkv)) for t in normed]
        heads_out = [[0.0] * (h * dh) for _ in x]
        for head in range(h):
            def part(vecs, which):
                base = which * h * dh + head * dh
                return [v[base : base + dh] for v in vecs]

            q, kk, vv = part(qkv, 0), part(qkv, 1), part(qkv, 2)
            for i in range(len(x)):
                att = softmax([sum(q[i][c] * kk[j][c] for c in range(dh)) / math.sqrt(dh) for j in range(len(x))])
                for c in range(dh):
                    heads_out[i][head * dh + c] = sum(att[j] * vv[j][c] for j in range(len(x)))
        proj = [matvec(o, *lin_params(block.attn.proj)) for o in heads_out]
        x = [[a + p for a, p in zip(t, pr)] for t, pr in zip(x, proj)]
        mlp = []
        for t in x:
            hid = [max(0.0, v) for v in matvec(layer_norm(t, *ln_params(block.norm2)), *lin_params(block.fc1))]
            mlp.append(matvec(hid, *lin_params(block.fc2)))
        x = [[a + m for a, m in zip(t, mm)] for t, mm in zip(x, mlp)]
    out = matvec(layer_norm(x[0], *ln_params(r.norm_out)), *lin_params(r.head))
    return out[0]
