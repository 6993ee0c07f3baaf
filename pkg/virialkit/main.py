# virialkit/main.py

from fastapi import FastAPI

from .routes_inversion import router as inversion_router
from .routes_bounds import router as bounds_router


app = FastAPI(title="virialkit - density/activity inversion")

# Routers
app.include_router(inversion_router)
app.include_router(bounds_router)


@app.get("/")
def root():
    return {"message": "virialkit running"}
