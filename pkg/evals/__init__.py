# Acceptance experiments for the survival toolkit
