"""The multi-task video transformer: tokenizer, encoder with token selection, heads."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoder import AttentionRecord, BlockParams, vit_block
from .errors import ShapeError
from .heads import ClassifierParams, DecoderParams, classify, decode_heatmaps
from .selection import SelectionOutcome, apply_selection
from .settings import EncoderConfig, HeadConfig, RunConfig, SelectionConfig, SimilarityFeature
from .tensor import Tensor, layernorm, split
from .video import ClipSpec, TokenizerParams, cube_embed


@dataclass
class ForwardOutput:
    """Everything one forward pass produces.

    Attributes:
        logits: Class scores.
        heatmaps: ``L × 4h × 4w`` raw decoder output, None without pose tokens.
        token_counts: Tokens entering each layer.
        visual_counts: Visual tokens entering each layer.
        outcomes: One per selection stage that ran.
        records: Per-layer attention, when requested.
    """

    logits: Tensor
    heatmaps: Tensor | None
    token_counts: list[int] = field(default_factory=list)
    visual_counts: list[int] = field(default_factory=list)
    outcomes: list[SelectionOutcome] = field(default_factory=list)
    records: list[AttentionRecord] = field(default_factory=list)


class VideoTransformer:
    """Clip classifier with an optional pose-heatmap branch.

    With ``pose_tokens=False`` the model is a plain ViT video classifier; with
    it, N_p pose tokens ride along the sequence and feed the heatmap decoder.
    """

    def __init__(
        self,
        spec: ClipSpec,
        encoder: EncoderConfig,
        heads: HeadConfig,
        *,
        pose_tokens: bool = True,
        seed: int = 0,
    ) -> None:
        self.spec = spec
        self.encoder = encoder
        self.heads = heads
        self.pose_tokens = pose_tokens
        rng = np.random.default_rng(seed)
        std = encoder.init_std
        dim = encoder.dim

        self.embed = TokenizerParams.init(spec, dim, rng, pose_tokens=pose_tokens, std=std)
        self.blocks = [
            BlockParams.init(dim, encoder.mlp_ratio, rng, std) for _ in range(encoder.depth)
        ]
        self.norm_gamma = Tensor(np.ones(dim), requires_grad=True)
        self.norm_beta = Tensor(np.zeros(dim), requires_grad=True)
        self.classifier = ClassifierParams.init(dim, heads.num_classes, rng, std)
        self.decoder = (
            DecoderParams.init(dim, heads.decoder_width(dim), heads.landmarks, rng, std)
            if pose_tokens
            else None
        )

    @classmethod
    def from_config(cls, cfg: RunConfig) -> VideoTransformer:
        return cls(
            ClipSpec.from_config(cfg.clip),
            cfg.encoder,
            cfg.heads,
            pose_tokens=cfg.pose_tokens,
            seed=cfg.seed,
        )

    def named_parameters(self) -> dict[str, Tensor]:
        params = dict(self.embed.named())
        for i, block in enumerate(self.blocks):
            params.update(block.named(f"blocks.{i}"))
        params["norm.gamma"] = self.norm_gamma
        params["norm.beta"] = self.norm_beta
        params.update(self.classifier.named())
        if self.decoder is not None:
            params.update(self.decoder.named())
        return params

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            msg = f"State mismatch: missing {missing[:3]}, unexpected {unexpected[:3]}"
            raise ShapeError(msg)
        for name, p in params.items():
            if state[name].shape != p.shape:
                msg = f"{name}: checkpoint dims {list(state[name].shape)}, model {p.dims}"
                raise ShapeError(msg)
            p.data[...] = state[name]

    def selection_stages(self, selection: SelectionConfig | None) -> set[int]:
        if selection is None or selection.is_identity:
            return set()
        return set(selection.stages_for(self.encoder))

    def forward(
        self,
        clip: Tensor | np.ndarray,
        selection: SelectionConfig | None = None,
        *,
        keep_records: bool = False,
    ) -> ForwardOutput:
        """Run the full model on one clip of `spec.dims`."""
        stages = self.selection_stages(selection)
        keep_qk = (
            selection is not None and selection.similarity_feature is not SimilarityFeature.ATTN
        )
        batch = cube_embed(clip, self.spec, self.embed)
        out_counts: list[int] = []
        out_visual: list[int] = []
        outcomes: list[SelectionOutcome] = []
        records: list[AttentionRecord] = []

        for layer, block in enumerate(self.blocks, start=1):
            out_counts.append(batch.n_tokens)
            out_visual.append(batch.n_visual)
            at_stage = layer in stages
            batch, record = vit_block(
                batch,
                block,
                self.encoder.heads,
                layer=layer,
                keep_qk=at_stage and keep_qk,
                eps=self.encoder.ln_eps,
            )
            if keep_records:
                records.append(record)
            if at_stage and selection is not None:
                batch, outcome = apply_selection(batch, record, selection)
                outcomes.append(outcome)

        x = layernorm(batch.tokens, self.norm_gamma, self.norm_beta, self.encoder.ln_eps)
        cls_token, pose, _ = split(x, [1, batch.n_pose, batch.n_visual])
        logits = classify(cls_token, self.classifier)
        heatmaps = None
        if self.decoder is not None:
            heatmaps = decode_heatmaps(pose, self.decoder, (self.spec.h, self.spec.w))
        return ForwardOutput(
            logits=logits,
            heatmaps=heatmaps,
            token_counts=out_counts,
            visual_counts=out_visual,
            outcomes=outcomes,
            records=records,
        )

    __call__ = forward
