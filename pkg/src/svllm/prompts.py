"""Two-stage prompt rendering with ablation toggles.

Stage one asks for a step-by-step rationale about the location; stage
two restates the 0.0-9.9 answer format and, when chain-of-thought is
enabled, embeds the rationale verbatim. Rendering is a pure function of
(context, task, scale, flags, template version), so identical inputs
produce byte-identical bundles.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .binning import BinScale
from .errors import ConfigError, CotDisabled
from .retrieval.types import GeoContext
from .tasks import IndicatorTask

TEMPLATE_VERSION = "svllm-templates/1"

STAGE_RATIONALE = "rationale"
STAGE_ANSWER = "answer"


@dataclass(frozen=True)
class AblationFlags:
    use_cot: bool = True
    use_streetview: bool = True
    use_text: bool = True


PRESETS: dict[str, AblationFlags] = {
    "Full": AblationFlags(use_cot=True, use_streetview=True, use_text=True),
    "WithoutCOT": AblationFlags(use_cot=False, use_streetview=True, use_text=True),
    "WithoutStreetview": AblationFlags(use_cot=True, use_streetview=False, use_text=True),
    "WithoutTEXT": AblationFlags(use_cot=True, use_streetview=True, use_text=False),
}

PRESET_ALIASES = {
    "full": "Full",
    "no-cot": "WithoutCOT",
    "no-svi": "WithoutStreetview",
    "no-text": "WithoutTEXT",
}


def resolve_preset(name: str) -> tuple[str, AblationFlags]:
    canonical = PRESET_ALIASES.get(name, name)
    if canonical not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of "
                          f"{sorted(PRESETS) + sorted(PRESET_ALIASES)}")
    return canonical, PRESETS[canonical]


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    image_attachments: tuple[str, ...]
    stage: str
    template_version: str
    sample_id: str
    task: str

    def digest(self) -> str:
        h = hashlib.sha256()
        for part in (self.stage, self.template_version, self.system_text,
                     self.user_text, "\x1f".join(self.image_attachments)):
            h.update(part.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()


@dataclass(frozen=True)
class Rationale:
    text: str
    token_count: int = 0
    model_id: str = ""
    latency_ms: float = 0.0


_RATIONALE_SYSTEM = (
    "You are an expert urban analyst. You study locations through their "
    "coordinates, descriptions, and street-level photographs, and you reason "
    "carefully about what the surroundings imply for urban indicators."
)

_ANSWER_SYSTEM = (
    "You are an expert urban analyst. You give calibrated numeric estimates "
    "of urban indicators on a fixed reporting scale."
)


def _context_block(ctx: GeoContext, flags: AblationFlags) -> tuple[str, tuple[str, ...]]:
    lines = [f"Coordinates: latitude {ctx.point.lat:.6f}, longitude {ctx.point.lon:.6f}"]
    if flags.use_text:
        lines.append(f"Address: {ctx.address.display_name}")
        if ctx.nearby:
            lines.append("Nearby places (nearest first):")
            for i, place in enumerate(ctx.nearby, start=1):
                tag = f"; {place.category}" if place.category else ""
                lines.append(f"  {i}. {place.name} ({place.distance_m:.0f} m{tag})")
        else:
            lines.append("Nearby places: none found within range.")
    attachments: tuple[str, ...] = ()
    if flags.use_streetview and ctx.image.available:
        lines.append("A street-level photograph taken at this location is attached.")
        attachments = (ctx.image.local_path,)
    return "\n".join(lines), attachments


def render_rationale_prompt(ctx: GeoContext, task: IndicatorTask,
                            flags: AblationFlags) -> PromptBundle:
    """Stage-one prompt asking for reasoning, not a number."""
    if not flags.use_cot:
        raise CotDisabled("rationale stage is disabled when use_cot is false")
    context_text, attachments = _context_block(ctx, flags)
    user_text = (
        f"Consider the following location and the indicator "
        f"\"{task.display_name}\" (measured in {task.unit}).\n"
        f"\n"
        f"{context_text}\n"
        f"\n"
        f"Think step by step. Identify the factors visible or implied by this "
        f"location that influence {task.display_name.lower()}, and explain "
        f"whether each factor points to a higher or lower value. Do not state "
        f"a final number."
    )
    return PromptBundle(system_text=_RATIONALE_SYSTEM, user_text=user_text,
                        image_attachments=attachments, stage=STAGE_RATIONALE,
                        template_version=TEMPLATE_VERSION,
                        sample_id=ctx.point.id, task=task.key)


def render_answer_prompt(ctx: GeoContext, rationale: Rationale, task: IndicatorTask,
                         scale: BinScale, flags: AblationFlags,
                         answer_images: bool = True) -> PromptBundle:
    """Stage-two prompt demanding one value on the 0.0-9.9 scale."""
    context_text, attachments = _context_block(ctx, flags)
    if not answer_images:
        attachments = ()
    parts = [
        f"Estimate \"{task.display_name}\" (measured in {task.unit}) for the "
        f"location below.",
        "",
        context_text,
    ]
    if flags.use_cot and rationale.text:
        parts += ["", "Reasoning to take into account:", rationale.text]
    parts += [
        "",
        f"Report your estimate as a single value on a scale from 0.0 to 9.9 in "
        f"steps of 0.1, where 0.0 is the lowest level observed for this "
        f"indicator (among {scale.n_fit} reference locations) and 9.9 is the "
        f"highest. Reply with the number first.",
    ]
    return PromptBundle(system_text=_ANSWER_SYSTEM, user_text="\n".join(parts),
                        image_attachments=attachments, stage=STAGE_ANSWER,
                        template_version=TEMPLATE_VERSION,
                        sample_id=ctx.point.id, task=task.key)
