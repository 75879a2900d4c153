# Statistics tests package initialization
