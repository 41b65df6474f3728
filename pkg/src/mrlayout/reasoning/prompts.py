"""Prompt construction for rating area suitability with a vision-language model."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ..errors import ValidationError


class Mode(str, Enum):
    OVERLAY = "overlay"
    INTERACTION = "interaction"


@dataclass(frozen=True)
class AreaAnnotation:
    index: int
    box2d: tuple[float, float, float, float]
    entity_id: str | None = None

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValidationError(f"area index must be >= 1, got {self.index}")
        x0, y0, x1, y1 = self.box2d
        if not (x0 < x1 and y0 < y1):
            raise ValidationError(f"area {self.index} has a degenerate rectangle")


@dataclass(frozen=True)
class AreaStat:
    index: int
    median: float
    sd: float

    def __post_init__(self) -> None:
        if not 1.0 <= self.median <= 5.0:
            raise ValidationError(f"median must lie in [1, 5], got {self.median}")
        if self.sd < 0:
            raise ValidationError(f"sd must be >= 0, got {self.sd}")


@dataclass(frozen=True)
class FewShotExample:
    image: str
    areas: tuple[AreaStat, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "areas", tuple(self.areas))
        if not self.areas:
            raise ValidationError(f"few-shot example {self.image!r} has no areas")
        _check_indices([a.index for a in self.areas], f"few-shot example {self.image!r}")


@dataclass(frozen=True)
class RatingQuery:
    mode: Mode
    image: str
    areas: tuple[AreaAnnotation, ...]
    few_shot: tuple[FewShotExample, ...] = ()
    monitor_refinement: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "areas", tuple(self.areas))
        object.__setattr__(self, "few_shot", tuple(self.few_shot))
        if not self.areas:
            raise ValidationError("a rating query needs at least one area")
        _check_indices([a.index for a in self.areas], f"image {self.image!r}")


def _check_indices(indices: list[int], where: str) -> None:
    if sorted(indices) != list(range(1, len(indices) + 1)):
        raise ValidationError(f"area indices of {where} must be unique and contiguous from 1, got {indices}")


# Context text shown to the model before any rated example. The interaction
# variant is the reference wording; the overlay variant swaps the activity.
_ACTIVITY = {
    Mode.INTERACTION: "directly interacting with virtual UI elements",
    Mode.OVERLAY: "overlaying virtual UI elements",
}

_CONTEXT = (
    "You will mimic a participant of a survey in which participants had to rate the suitability of "
    "Mixed Reality layouts that overlay User Interfaces onto parts of the real world. Thus, you will "
    "rate the suitability of {activity} that you imagine be placed on each highlighted area of an "
    "image.All virtual elements would only be visible to you, not to other people in the image. All "
    "virtual elements would not obstruct the view of other people or light. The people you can see in "
    "the image are someone else, not yourself. You will rate the suitability of each area on a score "
    "that ranges from 1 to 5 where 1 means 'unsuitable', 2 means 'somewhat unsuitable', 3 means "
    "'neutral', 4 means 'somewhat suitable' and 5 means 'suitable'.\n"
    "\n"
    "You will be asked to give the primary reason for your choice of suitability. Optional reasons "
    "are: functionality, social, health & safety, aesthetics, and other. Functionality means: the UI "
    "element hinders the functionality of the physical object. Social acceptability means: looking at "
    "or interacting with the UI element would be socially inappropriate. Health & Safety means: the UI "
    "element occludes safety critical information or may lead to sanitation issues during interaction. "
    "Aesthetics means: the UI element impairs the visual appeal of the physical surroundings. Other "
    "means: your primary reason is not covered in the list above.\n"
    "\n"
    "To improve your ability to imitate a participant, you will be shown images they have evaluated "
    "and receive information about the median and standard deviation of their ratings for the "
    "highlighted areas of these images. Please take these ratings into account when judging new images."
)

_SUITABILITY = {Mode.INTERACTION: "direct interaction suitability", Mode.OVERLAY: "overlay suitability"}

MONITOR_REFINEMENT = "When a monitor displays content, overlaying a virtual element on top of it is unsuitable."

_QUESTION = {
    Mode.OVERLAY: "Please rate the suitability of overlaying a virtual UI element on each area in this image.",
    Mode.INTERACTION: (
        "Please rate the suitability of directly interacting with virtual UI elements displayed in each "
        "area. Note: All virtual elements are positioned within your arm's reach. If a virtual element "
        "covers a physical object, interacting with it means physically touching that object."
    ),
}

RESPONSE_FORMAT = "Area <area index>: <score>, <reason>"


def context_text(mode: Mode | str) -> str:
    return _CONTEXT.format(activity=_ACTIVITY[Mode(mode)])


def few_shot_block(example: FewShotExample, mode: Mode | str) -> str:
    """One rated example, e.g. ``...: area 1: median 2.0, standard deviation 1.74;``."""
    parts = [f"area {a.index}: median {a.median:.1f}, standard deviation {a.sd:.2f};"
             for a in sorted(example.areas, key=lambda a: a.index)]
    return ("Participants of a survey provided the following median responses along with standard "
            f"deviations for the {_SUITABILITY[Mode(mode)]} of the areas in this image: " + " ".join(parts))


def image_marker(image: str) -> str:
    return f"[image: {image}]"


def build_context_prompt(query: RatingQuery) -> str:
    """Context text, then one image marker and rating block per few-shot example,
    then the monitor sentence when requested. Blocks are blank-line separated."""
    blocks = [context_text(query.mode)]
    for ex in query.few_shot:
        blocks.append(image_marker(ex.image) + "\n" + few_shot_block(ex, query.mode))
    if query.monitor_refinement:
        blocks.append(MONITOR_REFINEMENT)
    return "\n\n".join(blocks)


def build_query_prompt(mode: Mode | str, n_areas: int | None = None) -> str:
    mode = Mode(mode)
    lines = [_QUESTION[mode]]
    if n_areas is not None:
        lines.append(f"The image has {n_areas} highlighted area{'s' if n_areas != 1 else ''}, numbered from 1.")
    lines.append(f"Answer with one line per area in the format: {RESPONSE_FORMAT}")
    return "\n".join(lines)


def build_prompt(query: RatingQuery) -> str:
    """Full text sent with the query image: context, then the question."""
    return build_context_prompt(query) + "\n\n" + image_marker(query.image) + "\n" + \
        build_query_prompt(query.mode, len(query.areas))
