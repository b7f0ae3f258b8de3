"""OpenTelemetry tracing for scenario runs.

Spans go to any OTLP/HTTP collector. With tracing disabled the global
no-op tracer stays in place, so instrumented code runs unchanged.
"""

from __future__ import annotations

import logging
from collections.abc import Generator
from contextlib import contextmanager
from types import TracebackType
from typing import TYPE_CHECKING

from opentelemetry import trace
from opentelemetry.exporter.otlp.proto.http.trace_exporter import OTLPSpanExporter
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor
from opentelemetry.util.types import AttributeValue

if TYPE_CHECKING:
    from irs_nlos.config import Settings
    from irs_nlos.simkit.scenario import ScenarioConfig

logger = logging.getLogger(__name__)

TRACER_NAME = "irs-nlos"


def setup_tracing(settings: Settings) -> TracerProvider | None:
    """Configure OpenTelemetry tracing.

    Args:
        settings: Application settings containing the exporter configuration.

    Returns:
        The configured TracerProvider, or None if tracing is disabled.
    """
    if not settings.enable_tracing:
        logger.info("Tracing is disabled")
        return None

    resource = Resource.create(
        {
            "service.name": settings.service_name,
            "service.version": settings.service_version,
            "deployment.environment": settings.deployment_environment,
        }
    )
    provider = TracerProvider(resource=resource)

    # Batch export keeps span emission off the epoch loop
    exporter = OTLPSpanExporter(endpoint=settings.otlp_traces_endpoint)
    provider.add_span_processor(BatchSpanProcessor(exporter))

    trace.set_tracer_provider(provider)
    logger.info(f"Tracing configured - sending traces to {settings.otlp_traces_endpoint}")
    return provider


def get_tracer(name: str = TRACER_NAME) -> trace.Tracer:
    """Get a tracer instance for manual span creation."""
    return trace.get_tracer(name)


@contextmanager
def trace_operation(
    name: str,
    attributes: dict[str, AttributeValue] | None = None,
) -> Generator[trace.Span, None, None]:
    """Context manager for tracing an operation.

    Args:
        name: The span name.
        attributes: Optional attributes to add to the span.

    Yields:
        The active span.

    Example:
        ```python
        with trace_operation("epoch", {"epoch.index": 3}) as span:
            span.set_attribute("epoch.detections", 2)
        ```
    """
    tracer = get_tracer()
    with tracer.start_as_current_span(name) as span:
        if attributes:
            for key, value in attributes.items():
                span.set_attribute(key, value)
        yield span


def add_scenario_attributes(span: trace.Span, cfg: ScenarioConfig, seed: int) -> None:
    """Add standard scenario attributes to a span."""
    span.set_attribute("scenario.name", cfg.name)
    span.set_attribute("scenario.seed", seed)
    span.set_attribute("scenario.mode", cfg.mode)
    span.set_attribute("scenario.epochs", cfg.epochs)
    span.set_attribute("scenario.radars", len(cfg.radars))
    span.set_attribute("scenario.targets", len(cfg.targets))


class TracingContext:
    """Context manager for the complete tracing setup.

    Example:
        ```python
        with TracingContext(get_settings()):
            run_scenario(cfg)
        ```
    """

    def __init__(self, settings: Settings):
        self.settings = settings
        self.provider: TracerProvider | None = None

    def __enter__(self) -> TracingContext:
        self.provider = setup_tracing(self.settings)
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: TracebackType | None,
    ) -> None:
        """Flush and shut down tracing on context exit."""
        if self.provider:
            self.provider.force_flush()
            self.provider.shutdown()
            logger.info("Tracing shut down - all spans flushed")
