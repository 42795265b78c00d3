"""Service layer: signal IO, WSOLA engine, saliency model, agent, metrics and reports."""
