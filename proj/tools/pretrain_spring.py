#!/usr/bin/env python3
# Copyright 2026 The psqp Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#
"""Fit the 1-32-32-32-1 tanh network to the exact damped-spring solution.

Writes a parameter file in the psqp layout (int32 width count, int32 widths,
float64 parameters, little-endian). The fit matches value, first and second
time derivatives on a dense grid so that the ODE residual of the network is
small as well. An Adam warm-up finds the basin and Levenberg-Marquardt
polishes it. Used to build the test fixture tests/data/spring_fit.bin.
"""

import argparse
import math
import struct

import torch

torch.set_default_dtype(torch.float64)

MASS, FRICTION, STIFFNESS = 1.0, 4.0, 400.0
AMPLITUDE, PHASE = 0.5, 0.0
WIDTHS = [1, 32, 32, 32, 1]


def exact(t):
    delta = FRICTION / (2 * MASS)
    omega = math.sqrt(STIFFNESS / MASS - delta**2)
    return 2 * AMPLITUDE * torch.exp(-delta * t) * torch.cos(PHASE + omega * t)


def build():
    layers = []
    for i in range(len(WIDTHS) - 1):
        layers.append(torch.nn.Linear(WIDTHS[i], WIDTHS[i + 1]))
        if i + 2 < len(WIDTHS):
            layers.append(torch.nn.Tanh())
    return torch.nn.Sequential(*layers)


def derivatives(fn, t):
    t = t.clone().requires_grad_(True)
    u = fn(t)
    du = torch.autograd.grad(u.sum(), t, create_graph=True)[0]
    d2u = torch.autograd.grad(du.sum(), t, create_graph=True)[0]
    return u, du, d2u


def unflatten(theta):
    """Per-layer (W, b) views of a flat parameter vector in psqp order."""
    layers, at = [], 0
    for i in range(len(WIDTHS) - 1):
        rows, cols = WIDTHS[i + 1], WIDTHS[i]
        w = theta[at:at + rows * cols].reshape(rows, cols)
        at += rows * cols
        b = theta[at:at + rows]
        at += rows
        layers.append((w, b))
    return layers


def jets(theta, t):
    """(u, u', u'') of the network at column t, propagated forward."""
    y, d1, d2 = t, torch.ones_like(t), torch.zeros_like(t)
    layers = unflatten(theta)
    for i, (w, b) in enumerate(layers):
        y, d1, d2 = y @ w.T + b, d1 @ w.T, d2 @ w.T
        if i + 1 < len(layers):
            a = torch.tanh(y)
            s = 1 - a * a
            y, d1, d2 = a, s * d1, s * d2 - 2 * a * s * d1 * d1
    return y, d1, d2


def flatten(net):
    theta = []
    for layer in net:
        if isinstance(layer, torch.nn.Linear):
            theta.append(layer.weight.detach().reshape(-1))
            theta.append(layer.bias.detach())
    return torch.cat(theta)


def read_params(path):
    with open(path, "rb") as f:
        (count,) = struct.unpack("<i", f.read(4))
        widths = list(struct.unpack(f"<{count}i", f.read(4 * count)))
        if widths != WIDTHS:
            raise SystemExit(f"{path}: widths {widths}, expected {WIDTHS}")
        data = f.read()
    return torch.tensor(struct.unpack(f"<{len(data) // 8}d", data))


def write_params(path, theta):
    with open(path, "wb") as f:
        f.write(struct.pack("<i", len(WIDTHS)))
        f.write(struct.pack(f"<{len(WIDTHS)}i", *WIDTHS))
        f.write(struct.pack(f"<{theta.numel()}d", *theta.tolist()))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="tests/data/spring_fit.bin")
    ap.add_argument("--init", help="start from an existing parameter file and skip the warm-up")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--warmup", type=int, default=20000)
    ap.add_argument("--lr", type=float, default=3e-3)
    ap.add_argument("--iters", type=int, default=300, help="Levenberg-Marquardt iterations")
    ap.add_argument("--points", type=int, default=501)
    ap.add_argument("--weights", type=float, nargs=3, default=[1.0, 1.0, 1.0], metavar=("U", "DU", "D2U"),
                    help="extra weights on the value, first and second derivative misfits")
    ap.add_argument("--save-every", type=int, default=10, help="write the current fit every N iterations")
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    grid = torch.linspace(0.0, 1.0, args.points).unsqueeze(1)
    u_ref, du_ref, d2u_ref = (x.detach() for x in derivatives(exact, grid))
    dense = torch.linspace(0.0, 1.0, 1001).unsqueeze(1)
    dense_ref = exact(dense)

    if args.init:
        theta = read_params(args.init)
    else:
        # Adam first: second-order polishing from a cold start lands in a poor basin.
        net = build()

        def loss_fn():
            u, du, d2u = derivatives(net, grid)
            return (((u - u_ref) ** 2).mean() + (((du - du_ref) / 20) ** 2).mean()
                    + (((d2u - d2u_ref) / 400) ** 2).mean())

        warm = torch.optim.Adam(net.parameters(), lr=args.lr)
        sched = torch.optim.lr_scheduler.CosineAnnealingLR(warm, args.warmup)
        for step in range(args.warmup):
            warm.zero_grad()
            loss = loss_fn()
            loss.backward()
            warm.step()
            sched.step()
            if step % 2000 == 0:
                print(f"warmup {step}: loss {loss.item():.3e}", flush=True)
        theta = flatten(net)

    # Sobolev residuals, scaled so u, u' and u'' weigh alike.
    w_u, w_du, w_d2u = args.weights

    def residuals(th):
        u, du, d2u = jets(th, grid)
        return torch.cat([w_u * (u - u_ref).reshape(-1), w_du * ((du - du_ref) / 20).reshape(-1),
                          w_d2u * ((d2u - d2u_ref) / 400).reshape(-1)])

    def report(th):
        u, du, d2u = jets(th, dense)
        err = (u - dense_ref).abs().max().item()
        res = (MASS * d2u + FRICTION * du + STIFFNESS * u).abs().max().item()
        return err, res

    # Levenberg-Marquardt in the row space: delta = -J^T (J J^T + lam I)^-1 r.
    lam = 1e-6
    r = residuals(theta)
    cost = r.dot(r).item()
    for it in range(args.iters):
        jac = torch.func.jacrev(residuals)(theta)
        gram = jac @ jac.T
        eye = torch.eye(gram.shape[0])
        while True:
            step = -jac.T @ torch.linalg.solve(gram + lam * eye, r)
            trial = theta + step
            r_trial = residuals(trial)
            trial_cost = r_trial.dot(r_trial).item()
            if trial_cost < cost:
                theta, r, cost = trial, r_trial, trial_cost
                lam = max(lam / 3, 1e-15)
                break
            lam *= 4
            if lam > 1e6:
                break
        err, res = report(theta)
        if args.save_every and (it + 1) % args.save_every == 0:
            write_params(args.out, theta)
        print(f"lm {it}: cost {cost:.3e} lambda {lam:.1e} max|u-u*| {err:.3e} max|residual| {res:.3e}", flush=True)
        if lam > 1e6 or (err < 1e-8 and res < 1e-5):
            break

    write_params(args.out, theta)
    print(f"wrote {theta.numel()} parameters to {args.out}")


if __name__ == "__main__":
    main()
