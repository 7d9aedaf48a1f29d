# Copyright 2026 The leafbg Authors
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

"""Writes a MobileNetV2 backbone bundle for `backbone.kind = onnx`.

The bundle directory gets:
  trunk.onnx  input 1x3x224x224 RGB in [0,1], fed to the network as is (no
              mean/std standardisation), output 1x160x7x7
  tail.lbgt   last inverted-residual block and final 1x1 conv, named as the
              native tail expects

    python tools/export_backbone.py --out models/mobilenet_v2              # ImageNet weights
    python tools/export_backbone.py --out models/mobilenet_v2 --state-dict mnv2.pth
    python tools/export_backbone.py --out /tmp/rand --random --seed 3      # untrained, for tests
"""

import argparse
import json
import pathlib
import struct
import sys

import numpy as np
import torch
import torchvision

MAGIC = b"LBGTENS1"
TRUNK_BLOCKS = 17  # features[0:17] ends at the last 160-channel block (7x7)


def write_lbgt(path, tensors, meta):
    """Tensor archive: magic, u64 header length, JSON header, packed f64 payloads."""
    entries, payload, offset = [], [], 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "dtype": "f64", "offset": offset})
        payload.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps({"meta": meta, "tensors": entries}).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for chunk in payload:
            f.write(chunk)


def strip_initializer_identities(path):
    # OpenCV's importer rejects Identity nodes whose input is an initializer;
    # rewire their consumers straight to the initializer.
    import onnx

    model = onnx.load(path)
    inits = {i.name for i in model.graph.initializer}
    rename, keep = {}, []
    for node in model.graph.node:
        if node.op_type == "Identity" and node.input[0] in inits:
            rename[node.output[0]] = node.input[0]
        else:
            keep.append(node)
    for node in keep:
        for i, name in enumerate(node.input):
            if name in rename:
                node.input[i] = rename[name]
    del model.graph.node[:]
    model.graph.node.extend(keep)
    onnx.checker.check_model(model)
    onnx.save(model, path)


def bn_tensors(prefix, bn):
    return {
        prefix + ".gamma": bn.weight.detach().numpy(),
        prefix + ".beta": bn.bias.detach().numpy(),
        prefix + ".mean": bn.running_mean.numpy(),
        prefix + ".var": bn.running_var.numpy(),
    }


def tail_tensors(model):
    block = model.features[17].conv
    expand, depthwise, project, project_bn = block[0], block[1], block[2], block[3]
    final = model.features[18]
    t = {
        "tail.block.expand.weight": expand[0].weight.detach().numpy().reshape(960, 160),
        "tail.block.depthwise.weight": depthwise[0].weight.detach().numpy().reshape(960, 9),
        "tail.block.project.weight": project.weight.detach().numpy().reshape(320, 960),
        "tail.final.conv.weight": final[0].weight.detach().numpy().reshape(1280, 320),
    }
    t.update(bn_tensors("tail.block.expand_bn", expand[1]))
    t.update(bn_tensors("tail.block.depthwise_bn", depthwise[1]))
    t.update(bn_tensors("tail.block.project_bn", project_bn))
    t.update(bn_tensors("tail.final.bn", final[1]))
    return t


def randomise_bn_stats(model, gen):
    # Fresh torchvision BN layers are identities; give them non-trivial statistics
    # so a random bundle exercises every term.
    for m in model.modules():
        if isinstance(m, torch.nn.BatchNorm2d):
            n = m.num_features
            m.running_mean.copy_(torch.randn(n, generator=gen) * 0.1)
            m.running_var.copy_(torch.rand(n, generator=gen) * 0.5 + 0.75)
            m.weight.data.copy_(torch.rand(n, generator=gen) * 0.5 + 0.75)
            m.bias.data.copy_(torch.randn(n, generator=gen) * 0.1)


def export(model, out_dir, pretrained, source):
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.eval()
    trunk = model.features[:TRUNK_BLOCKS].eval()
    dummy = torch.zeros(1, 3, 224, 224)
    with torch.no_grad():
        shape = tuple(trunk(dummy).shape)
    if shape != (1, 160, 7, 7):
        raise SystemExit(f"unexpected trunk output shape {shape}")
    onnx_path = str(out / "trunk.onnx")
    torch.onnx.export(trunk, dummy, onnx_path, input_names=["input"], output_names=["features"],
                      opset_version=11, do_constant_folding=True, dynamo=False)
    strip_initializer_identities(onnx_path)
    eps = model.features[18][1].eps
    write_lbgt(out / "tail.lbgt", tail_tensors(model),
               {"pretrained": pretrained, "bn_epsilon": eps, "source": source})


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--out", required=True, help="bundle directory")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--state-dict", help="torchvision mobilenet_v2 state dict (.pth) to load")
    g.add_argument("--random", action="store_true", help="seeded random weights, marked not pretrained")
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args(argv)

    torch.manual_seed(a.seed)
    if a.random:
        model = torchvision.models.mobilenet_v2(weights=None)
        with torch.no_grad():
            randomise_bn_stats(model, torch.Generator().manual_seed(a.seed))
        export(model, a.out, False, f"random seed {a.seed}")
    elif a.state_dict:
        model = torchvision.models.mobilenet_v2(weights=None)
        model.load_state_dict(torch.load(a.state_dict, map_location="cpu"))
        export(model, a.out, True, pathlib.Path(a.state_dict).name)
    else:
        weights = torchvision.models.MobileNet_V2_Weights.IMAGENET1K_V1
        model = torchvision.models.mobilenet_v2(weights=weights)
        export(model, a.out, True, str(weights))
    print(f"wrote {a.out}/trunk.onnx and {a.out}/tail.lbgt")
    return 0


if __name__ == "__main__":
    sys.exit(main())
