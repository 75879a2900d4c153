# CLI tests package initialization
