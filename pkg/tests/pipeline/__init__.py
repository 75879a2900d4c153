# Pipeline tests package initialization
