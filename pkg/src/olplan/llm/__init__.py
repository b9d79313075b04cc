"""Language-model interaction: providers, prompt text, exemplar retrieval and the planning dialogue."""
