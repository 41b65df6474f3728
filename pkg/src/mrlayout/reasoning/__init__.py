"""Prompting a vision-language model for area suitability ratings and folding
the answers into entity ratings."""
from .aggregate import (AreaAggregate, LinkReport, aggregate_ratings, dump_ratings, load_ratings,
                        modal_category, ratings_to_entity, round_half_up)
from .parsing import (CATEGORY_ORDER, Category, Diagnostic, ParseFailure, ParseResult, RatingResponse,
                      classify_reason, parse_response, render_responses)
from .pipeline import InstanceResult, RatingRun, load_areas, load_few_shot, load_links, run_rating
from .prompts import (MONITOR_REFINEMENT, RESPONSE_FORMAT, AreaAnnotation, AreaStat, FewShotExample, Mode,
                      RatingQuery, build_context_prompt, build_prompt, build_query_prompt, context_text,
                      few_shot_block)
from .providers import (LiveProvider, MissingFixtureError, MockProvider, Provider, ProviderError,
                        ProviderStatusError, ProviderTimeoutError, ProviderTransportError, RateLimitError,
                        dump_fixtures)

__all__ = [
    "AreaAggregate", "LinkReport", "aggregate_ratings", "dump_ratings", "load_ratings", "modal_category",
    "ratings_to_entity", "round_half_up", "CATEGORY_ORDER", "Category", "Diagnostic", "ParseFailure",
    "ParseResult", "RatingResponse", "classify_reason", "parse_response", "render_responses",
    "InstanceResult", "RatingRun", "load_areas", "load_few_shot", "load_links", "run_rating",
    "MONITOR_REFINEMENT", "RESPONSE_FORMAT", "AreaAnnotation", "AreaStat", "FewShotExample", "Mode",
    "RatingQuery", "build_context_prompt", "build_prompt", "build_query_prompt", "context_text",
    "few_shot_block", "LiveProvider", "MissingFixtureError", "MockProvider", "Provider", "ProviderError",
    "ProviderStatusError", "ProviderTimeoutError", "ProviderTransportError", "RateLimitError",
    "dump_fixtures",
]
